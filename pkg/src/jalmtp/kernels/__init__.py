"""Hot inner-loop kernels with a compiled (Cython) core and a numpy fallback.

The compiled module is used when it imports; otherwise the numpy versions are
bound. ``use_backend`` switches explicitly (the benchmark and the parity tests
use it). Both backends implement identical contracts; results agree to
floating-point rounding, not necessarily bit-for-bit.
"""

import logging

from . import _numpy

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

log = logging.getLogger(__name__)

_NAMES = (
    "nearest_nodes",
    "rollout_node_min_dist",
    "attention_forward",
    "attention_backward",
    "gru_gates_forward",
    "gru_gates_backward",
)

BACKEND = None


def available_backends():
    return ["compiled", "numpy"] if _ckernels is not None else ["numpy"]


def use_backend(name):
    """Bind the kernel functions of this module to ``name`` ("compiled" or "numpy")."""
    global BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built; run `pip install -e .`")
        src = _ckernels
    elif name == "numpy":
        src = _numpy
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(src, fn)
    BACKEND = name
    return name


use_backend("compiled" if _ckernels is not None else "numpy")
if _ckernels is None:
    log.debug("jalmtp: compiled kernels unavailable, using numpy fallback")
