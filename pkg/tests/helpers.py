"""Shared fixtures-as-functions: op gradient cases and small scene builders."""

import numpy as np

from jalmtp.scenario import LaneGraph, Scene, TF, TP


def away_from_zero(rng, shape, margin=0.1):
    """Random values with |x| >= margin (keeps relu/abs/sign kinks out of reach of eps)."""
    x = rng.uniform(margin, 1.5, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


def op_cases(seed=0):
    """One gradient-check case per registered op: name -> (inputs, attrs, wrt)."""
    rng = np.random.default_rng(seed)
    n = rng.standard_normal
    labels = np.zeros((3, 4))
    labels[np.arange(3), [0, 2, 3]] = 1.0
    soft = 0.5 * rng.dirichlet(np.ones(4), size=3) + 0.125
    mask = np.array([[True, True, False, True], [True, False, False, False], [True, True, True, True]])
    win_mask = np.array([[True, True, True], [True, False, False]])
    step = np.array([[0.8, -0.3], [0.01, 0.02], [-0.5, 0.6]])
    return {
        "add": ([n((3, 4)), n((4,))], {}, None),
        "sub": ([n((3, 1)), n((3, 4))], {}, None),
        "mul": ([n((2, 3, 4)), n((3, 4))], {}, None),
        "scale": ([n((3, 4))], {"c": -1.7}, None),
        "matmul": ([n((2, 3, 4)), n((4, 5))], {}, None),
        "linear": ([n((3, 4)), n((4, 5)), n((5,))], {}, None),
        "concat": ([n((2, 3)), n((2, 1)), n((2, 2))], {"axis": -1}, None),
        "reshape": ([n((2, 6))], {"shape": (3, 4)}, None),
        "index": ([n((4, 3))], {"idx": (np.array([0, 2, 2, 3]), np.array([1, 0, 0, 2]))}, None),
        "segment_sum": ([n((5, 3))], {"ids": np.array([0, 2, 0, 1, 2]), "n": 4}, None),
        "tanh": ([n((3, 4))], {}, None),
        "sigmoid": ([n((3, 4))], {}, None),
        "relu": ([away_from_zero(rng, (3, 4))], {}, None),
        "exp": ([n((3, 4))], {}, None),
        "log": ([rng.uniform(0.2, 2.0, (3, 4))], {}, None),
        "sum": ([n((3, 4))], {"axis": 1}, None),
        "mean": ([n((3, 4))], {"axis": 0}, None),
        "min": ([n((3, 4))], {"axis": -1}, None),
        "softmax": ([n((3, 4))], {"mask": mask}, None),
        "cross_entropy": ([soft, labels], {}, [0]),
        "softmax_cross_entropy": ([n((3, 4)), soft], {"mask": None}, [0]),
        "l1": ([n((3, 2)), n((3, 2)) + 3.0], {}, None),
        "norm": ([away_from_zero(rng, (3, 5, 2))], {"axis": -1}, None),
        "heading": ([step, n(3)], {"min_step": 0.05}, None),
        "window_geometry": ([n((2, 2)), n(2), n((2, 3, 2)) * 3.0, n((2, 3))], {"dist_scale": 0.1}, [0, 1]),
        "conv1d": ([n((2, 6, 3)), n((3, 3, 4)) * 0.5, n(4)], {}, None),
        "gru_cell": ([n((3, 2)), n((3, 4)), n((2, 12)) * 0.5, n((4, 12)) * 0.5, n(12), n(12)], {}, None),
        "attention": ([n((2, 4)), n((2, 3, 4)), n((2, 3, 4))], {"mask": win_mask}, None),
    }


def straight_graph(length=120.0, step=2.0, y=0.0):
    xs = np.arange(-40.0, length + step / 2, step)
    return LaneGraph({"a": np.stack([xs, np.full_like(xs, y)], axis=1)})


def straight_scene(scene_id="s", speed=10.0, social=(), with_gt=True):
    """Target driving along +x on a straight lane, at ``speed`` m/s, t = 0 at the origin."""
    t = np.arange(-TP + 1, 1) * 0.1
    past = np.stack([speed * t, np.zeros(TP)], axis=1)
    ft = np.arange(1, TF + 1) * 0.1
    gt = np.stack([speed * ft, np.zeros(TF)], axis=1) if with_gt else None
    soc = np.asarray(social, dtype=np.float64).reshape(-1, TP, 2)
    return Scene(scene_id, past, soc, straight_graph(), gt)


def agent_track(start, velocity):
    """A constant-velocity social past ending at ``start`` (TP, 2)."""
    t = np.arange(-TP + 1, 1) * 0.1
    return np.asarray(start, float) + t[:, None] * np.asarray(velocity, float)
