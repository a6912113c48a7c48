"""Training loop and checkpoints (parameters, optimizer moments, config snapshot)."""

import json
import logging
import time

import numpy as np

from ..autodiff import CheckpointError, GradientTape, OptimizerState, backward, load_checkpoint, \
    optimizer_step, save_checkpoint
from ..model.network import JalMTP, prepare_training
from .config import ExperimentConfig

log = logging.getLogger(__name__)

_M = "adam.m/"
_V = "adam.v/"


def batch_order(n_items, batch_size, steps, seed):
    """Indices for every step: reshuffled epochs, drawn from a seeded generator."""
    rng = np.random.default_rng([seed, 7])
    out, pool = [], []
    for _ in range(steps):
        batch = []
        while len(batch) < min(batch_size, n_items):
            if not pool:
                pool = list(rng.permutation(n_items))
            batch.append(int(pool.pop()))
        out.append(batch)
    return out


class TrainResult:
    def __init__(self, model, opt, log_rows, skipped, seconds):
        self.model = model
        self.opt = opt
        self.log = log_rows
        self.skipped = skipped
        self.seconds = seconds


def train_step(model, items, opt):
    with GradientTape() as tape:
        total, parts = model.loss(items)
    grads = backward(total, tape, wrt=list(model.params.tensors.values()))
    optimizer_step(model.params.tensors, {k: grads[t.node_id] for k, t in model.params.items()}, opt)
    return parts


def train(config, scenes, model=None, opt=None, progress=None):
    """Train on ``scenes`` for ``config.steps`` steps; deterministic for a fixed config and data.

    Returns a TrainResult whose ``log`` has one record per step.
    """
    cfg = config.model()
    items, skipped = prepare_training(scenes, cfg)
    if not items:
        raise ValueError("no trainable scenes (all skipped)")
    model = model or JalMTP(cfg, seed=config.seed)
    opt = opt or OptimizerState(lr=config.lr)
    rows = []
    start = time.perf_counter()
    for step, idx in enumerate(batch_order(len(items), config.batch_size, config.steps, config.seed)):
        parts = train_step(model, [items[i] for i in idx], opt)
        rows.append({"step": opt.step, **parts})
        if progress is not None and (step + 1) % config.log_every == 0:
            progress(rows[-1])
    return TrainResult(model, opt, rows, skipped, time.perf_counter() - start)


def write_log(path, rows):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def save(path, model, config, opt=None):
    tensors = dict(model.params.arrays())
    meta = {"config": config.to_dict(), "step": 0}
    if opt is not None:
        for k in model.params:
            if k in opt.m:
                tensors[_M + k] = opt.m[k]
                tensors[_V + k] = opt.v[k]
        meta.update(step=opt.step, optimizer={"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2,
                                              "eps": opt.eps, "step": opt.step})
    save_checkpoint(path, tensors, config.seed, meta)


def load(path):
    """Returns (model, config, optimizer state)."""
    tensors, seed, meta = load_checkpoint(path)
    if "config" not in meta:
        raise CheckpointError(f"{path}: checkpoint has no config snapshot")
    config = ExperimentConfig.from_dict(meta["config"])
    model = JalMTP(config.model(), seed=seed)
    model.params.load({k: v for k, v in tensors.items() if not k.startswith(("adam.", ))})
    o = meta.get("optimizer", {})
    opt = OptimizerState(lr=o.get("lr", config.lr), beta1=o.get("beta1", 0.9), beta2=o.get("beta2", 0.999),
                         eps=o.get("eps", 1e-8), step=o.get("step", 0))
    for k, v in tensors.items():
        if k.startswith(_M):
            opt.m[k[len(_M):]] = v.copy()
        elif k.startswith(_V):
            opt.v[k[len(_V):]] = v.copy()
    return model, config, opt
