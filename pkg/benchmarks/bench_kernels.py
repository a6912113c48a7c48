"""Time each hot kernel under the compiled and numpy backends, then a full training step.

    python3 benchmarks/bench_kernels.py [--repeat N]

Shapes follow the default model (d=64, H=50, K=6, 8 scenes of up to 6 lanes).
"""

import argparse
import timeit

import numpy as np

from jalmtp import kernels
from jalmtp.kernels import _numpy


def kernel_cases(rng):
    d, h, lanes, w = 64, 50, 48, 8
    nodes = rng.standard_normal((lanes, h, 2)) * 30
    q, k, v = rng.standard_normal((lanes, d)), rng.standard_normal((lanes, w, d)), rng.standard_normal((lanes, w, d))
    mask = rng.random((lanes, w)) < 0.8
    mask[:, 0] = True
    _, att_w = _numpy.attention_forward(q, k, v, mask)
    gx, gh = rng.standard_normal((lanes, 3 * d)), rng.standard_normal((lanes, 3 * d))
    hid = rng.standard_normal((lanes, d))
    _, r, z, n = _numpy.gru_gates_forward(gx, gh, hid)
    return {
        "nearest_nodes": (nodes, rng.standard_normal((lanes, 2)) * 30),
        "rollout_node_min_dist": (nodes[0], rng.standard_normal((6, 30, 2)) * 30),
        "attention_forward": (q, k, v, mask),
        "attention_backward": (rng.standard_normal((lanes, d)), q, k, v, att_w),
        "gru_gates_forward": (gx, gh, hid),
        "gru_gates_backward": (rng.standard_normal((lanes, d)), hid, r, z, n, np.ascontiguousarray(gh[:, 2 * d:])),
    }


def time_call(fn, args, repeat):
    number = 200
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number * 1e6


def time_train_step(backend, repeat):
    from jalmtp.autodiff import OptimizerState
    from jalmtp.model.network import JalMTP, ModelConfig, prepare_training
    from jalmtp.pipeline import train_step
    from jalmtp.scenario import gen_synthetic

    kernels.use_backend(backend)
    cfg = ModelConfig()
    items, _ = prepare_training(gen_synthetic({"straight": 1, "fork": 1, "intersection": 1}, 8, 0), cfg)
    model, opt = JalMTP(cfg, seed=0), OptimizerState(lr=0.0)
    train_step(model, items, opt)
    return min(timeit.repeat(lambda: train_step(model, items, opt), number=1, repeat=repeat)) * 1e3


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if "compiled" not in kernels.available_backends():
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':<24}{'compiled us':>13}{'numpy us':>12}{'speedup':>10}")
    for name, call_args in cases.items():
        tc = time_call(getattr(kernels._ckernels, name), call_args, args.repeat)
        tn = time_call(getattr(_numpy, name), call_args, args.repeat)
        print(f"{name:<24}{tc:>13.1f}{tn:>12.1f}{tn / tc:>9.2f}x")

    before = kernels.BACKEND
    try:
        tc = time_train_step("compiled", args.repeat)
        tn = time_train_step("numpy", args.repeat)
    finally:
        kernels.use_backend(before)
    print(f"\n{'train step (8 scenes)':<24}{tc:>11.0f}ms{tn:>10.0f}ms{tn / tc:>9.2f}x")


if __name__ == "__main__":
    main()
