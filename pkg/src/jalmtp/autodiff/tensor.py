"""Tensor, gradient tape and the reverse pass."""

import itertools
import threading

import numpy as np

_ids = itertools.count(1)
_local = threading.local()


class AutodiffError(RuntimeError):
    pass


class Tensor:
    """A float64 array that can take part in a recorded computation.

    ``node_id`` is unique per process; gradient maps returned by
    :func:`backward` are keyed by it.
    """

    __slots__ = ("data", "requires_grad", "node_id", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_ids)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def values(self):
        """Row-major flat list of values."""
        return self.data.ravel().tolist()

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # operator sugar; the actual ops live in ``ops``
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.index(self, index)


class GradientTape:
    """Ordered record of ops executed while the tape is active.

    Use as a context manager. Records are appended in execution order, so
    inputs always precede the records that consume them. A tape supports
    exactly one backward pass.
    """

    def __init__(self):
        self.records = []
        self.consumed = False

    def __enter__(self):
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    def __len__(self):
        return len(self.records)


def active_tape():
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class no_record:
    """Suspend recording inside a block (evaluation, label computation)."""

    def __enter__(self):
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(None)

    def __exit__(self, *exc):
        _local.stack.pop()
        return False


def backward(loss, tape, wrt=None):
    """Reverse pass over ``tape`` seeded with d loss / d loss = 1.

    Returns ``{node_id: Tensor}`` holding a gradient for every requires-grad
    leaf read by the tape, plus every tensor in ``wrt``. Leaves that do not
    influence ``loss`` get exact zeros.
    """
    if tape.consumed:
        raise AutodiffError("gradient tape already consumed; record a new one")
    if loss.data.size != 1:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape.consumed = True

    grads = {loss.node_id: np.ones_like(loss.data)}
    produced = set()
    leaves = {}
    for rec in tape.records:
        produced.add(rec[2].node_id)
    for rec in tape.records:
        for t in rec[1]:
            if t.requires_grad and t.node_id not in produced:
                leaves[t.node_id] = t

    for bwd, inputs, out, saved in reversed(tape.records):
        g = grads.pop(out.node_id, None)
        if g is None:
            continue
        in_grads = bwd(saved, g)
        for t, gi in zip(inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            prev = grads.get(t.node_id)
            grads[t.node_id] = gi if prev is None else prev + gi

    result = {}
    targets = dict(leaves)
    if wrt is not None:
        for t in wrt:
            targets[t.node_id] = t
    for nid, t in targets.items():
        g = grads.get(nid)
        if g is None:
            g = np.zeros_like(t.data)
        elif g.shape != t.data.shape:
            g = np.broadcast_to(g, t.data.shape).copy()
        result[nid] = Tensor(g)
    return result
