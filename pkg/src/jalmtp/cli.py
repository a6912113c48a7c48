"""Command line: ``jalmtp gen | train | predict | eval | plot``.

Every subcommand exits 0 on success and prints ``error: ...`` to stderr with
exit status 1 on failure.
"""

import argparse
import json
import logging
import sys

from .pipeline import ExperimentConfig, evaluate, load, load_predictions, plot, predict, save, \
    save_predictions, train, write_log
from .scenario import gen_synthetic, load_scenes, save_scenes

log = logging.getLogger("jalmtp")


def parse_mix(text):
    """``straight=1,fork=2`` or a JSON object -> {template: weight}."""
    text = text.strip()
    if text.startswith("{"):
        mix = json.loads(text)
    else:
        mix = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            name, _, weight = part.partition("=")
            mix[name.strip()] = float(weight) if weight else 1.0
    if not mix:
        raise ValueError(f"empty template mix {text!r}")
    return {str(k): float(v) for k, v in mix.items()}


def cmd_gen(args):
    scenes = gen_synthetic(parse_mix(args.template_mix), args.count, args.seed)
    save_scenes(args.out, scenes)
    print(f"wrote {len(scenes)} scenes to {args.out}")


def cmd_train(args):
    config = ExperimentConfig.load(args.config)
    data = args.data or config.data_path
    if not data:
        raise ValueError("no training data: pass --data or set data_path in the config")
    scenes = load_scenes(data)

    def progress(row):
        log.info("step %d  total %.4f  reg %.4f", row["step"], row["total"], row["reg"])

    result = train(config, scenes, progress=progress)
    save(args.out, result.model, config, result.opt)
    write_log(args.out + ".log.jsonl", result.log)
    last = result.log[-1] if result.log else {}
    print(f"trained {len(result.log)} steps in {result.seconds:.1f}s on {len(scenes) - len(result.skipped)} "
          f"scenes ({len(result.skipped)} skipped); final loss {last.get('total', float('nan')):.4f}; "
          f"checkpoint {args.out}")


def cmd_predict(args):
    model, _, _ = load(args.ckpt)
    records = predict(model, load_scenes(args.data), args.k)
    save_predictions(args.out, records)
    bad = sum(not r.ok for r in records)
    print(f"wrote {len(records)} predictions to {args.out} ({bad} failed)")


def cmd_eval(args):
    model, _, _ = load(args.ckpt)
    report = evaluate(model, load_scenes(args.data), args.k)
    report.write(args.report, args.k or model.cfg.K)
    sys.stdout.write(report.to_text(args.k or model.cfg.K))


def cmd_plot(args):
    scenes = {s.scene_id: s for s in load_scenes(args.data)}
    if args.scene_id not in scenes:
        raise KeyError(f"scene {args.scene_id!r} not found in {args.data}")
    pred = None
    if args.pred:
        pred = {r.scene_id: r for r in load_predictions(args.pred)}.get(args.scene_id)
        if pred is None:
            raise KeyError(f"no prediction for scene {args.scene_id!r} in {args.pred}")
    plot(scenes[args.scene_id], pred, args.out)
    print(f"wrote {args.out}")


def build_parser():
    p = argparse.ArgumentParser(prog="jalmtp", description="Lane-conditioned multimodal trajectory prediction")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate synthetic scenes")
    g.add_argument("--template-mix", default="straight=1,fork=1",
                   help="template weights, e.g. 'straight=1,fork=1,congestion=0.5' or a JSON object")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="scene file (JSON lines)")
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--config", required=True, help="experiment config (JSON)")
    t.add_argument("--data", help="scene file; defaults to the config's data_path")
    t.add_argument("--out", required=True, help="checkpoint path; the loss log is written to OUT.log.jsonl")
    t.set_defaults(fn=cmd_train)

    pr = sub.add_parser("predict", help="predict K trajectories per scene")
    pr.add_argument("--ckpt", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--k", type=int, default=None, help="number of trajectories (default: the model's K)")
    pr.add_argument("--out", required=True, help="prediction file (JSON lines)")
    pr.set_defaults(fn=cmd_predict)

    e = sub.add_parser("eval", help="predict and score against ground truth")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--k", type=int, default=None)
    e.add_argument("--report", required=True, help="text report path; a JSON twin is written to REPORT.json")
    e.set_defaults(fn=cmd_eval)

    pl = sub.add_parser("plot", help="render one scene (and its prediction) as SVG")
    pl.add_argument("--scene-id", required=True)
    pl.add_argument("--data", required=True, help="scene file containing the scene")
    pl.add_argument("--pred", help="prediction file from 'predict'")
    pl.add_argument("--out", required=True, help="output .svg")
    pl.set_defaults(fn=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "k", None) is not None and args.k < 1:
        print("error: --k must be >= 1", file=sys.stderr)
        return 1
    try:
        args.fn(args)
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # every failure becomes a message and a nonzero status
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
