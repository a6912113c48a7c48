"""Named parameters and the small layer classes built on them."""

import math

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor


class ParamStore:
    """Ordered name -> Tensor map with seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.

    Every parameter draws from its own generator keyed by (seed, creation index), so
    adding a layer never reshuffles the initial values of the others.
    """

    def __init__(self, seed=0):
        self.seed = int(seed)
        self.tensors = {}

    def new(self, name, shape, fan_in, zero=False):
        if name in self.tensors:
            raise KeyError(f"duplicate parameter name {name!r}")
        if zero:
            data = np.zeros(shape)
        else:
            bound = 1.0 / math.sqrt(fan_in)
            rng = np.random.default_rng([self.seed, len(self.tensors)])
            data = rng.uniform(-bound, bound, size=shape)
        t = Tensor(data, requires_grad=True, name=name)
        self.tensors[name] = t
        return t

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def count(self):
        return int(sum(t.size for t in self.tensors.values()))

    def arrays(self):
        return {k: t.data for k, t in self.tensors.items()}

    def load(self, arrays):
        """Copy values in place from ``{name: array}``; names and shapes must match exactly."""
        missing = set(self.tensors) - set(arrays)
        extra = set(arrays) - set(self.tensors)
        if missing or extra:
            raise KeyError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, t in self.tensors.items():
            a = np.asarray(arrays[k], dtype=np.float64)
            if a.shape != t.shape:
                raise ValueError(f"parameter {k}: shape {a.shape} != {t.shape}")
            t.data[...] = a

    def zero_(self):
        for t in self.tensors.values():
            t.data[...] = 0.0


class Linear:
    def __init__(self, store, name, n_in, n_out):
        self.w = store.new(f"{name}.w", (n_in, n_out), n_in)
        self.b = store.new(f"{name}.b", (n_out,), n_in)

    def __call__(self, x, rowwise=False, relu=False):
        return ops.linear(x, self.w, self.b, rowwise=rowwise, relu=relu)


class MLP:
    """Linear -> relu -> ... -> Linear (no activation after the last layer)."""

    def __init__(self, store, name, sizes):
        self.layers = [Linear(store, f"{name}.{i}", a, b) for i, (a, b) in enumerate(zip(sizes, sizes[1:]))]

    def __call__(self, x, rowwise=False):
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x, rowwise, relu=i < last)
        return x


class Conv1d:
    def __init__(self, store, name, c_in, c_out, k):
        self.w = store.new(f"{name}.w", (k, c_in, c_out), k * c_in)
        self.b = store.new(f"{name}.b", (c_out,), k * c_in)

    def __call__(self, x, rowwise=False):
        return ops.conv1d(x, self.w, self.b, rowwise=rowwise)


class MultiScaleConv:
    """Parallel same-padded convolutions (kernels 3/5/7), relu, concatenated, projected to ``d``."""

    def __init__(self, store, name, c_in, d, kernels=(3, 5, 7)):
        self.convs = [Conv1d(store, f"{name}.k{k}", c_in, d // 2, k) for k in kernels]
        self.proj = Linear(store, f"{name}.proj", len(kernels) * (d // 2), d)

    def __call__(self, x, rowwise=False):
        feats = [ops.relu(c(x, rowwise)) for c in self.convs]
        return self.proj(ops.concat(feats, axis=-1), rowwise)


class GRUCell:
    def __init__(self, store, name, n_in, d):
        self.wx = store.new(f"{name}.wx", (n_in, 3 * d), d)
        self.wh = store.new(f"{name}.wh", (d, 3 * d), d)
        self.bx = store.new(f"{name}.bx", (3 * d,), d)
        self.bh = store.new(f"{name}.bh", (3 * d,), d)
        self.d = d

    def __call__(self, x, h, rowwise=False):
        return ops.gru_cell(x, h, self.wx, self.wh, self.bx, self.bh, rowwise=rowwise)


class GRUStack:
    """Two stacked GRU cells; ``step`` takes and returns a list of per-layer hidden states."""

    def __init__(self, store, name, n_in, d, layers=2):
        self.cells = [GRUCell(store, f"{name}.l{i}", n_in if i == 0 else d, d) for i in range(layers)]
        self.d = d

    def zeros(self, rows):
        return [Tensor(np.zeros((rows, self.d))) for _ in self.cells]

    def step(self, x, hs, top=None, rowwise=False):
        """Advance one step. ``top`` replaces the incoming top-layer state (attention residual)."""
        out = []
        inp = x
        for i, cell in enumerate(self.cells):
            h_in = top if (top is not None and i == len(self.cells) - 1) else hs[i]
            inp = cell(inp, h_in, rowwise)
            out.append(inp)
        return out
