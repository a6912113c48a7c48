"""Minimal reverse-mode automatic differentiation over float64 numpy arrays."""

from . import ops
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import check_function, grad_check
from .ops import OPS, ShapeError, forward
from .optim import OptimizerState, optimizer_step
from .tensor import AutodiffError, GradientTape, Tensor, active_tape, backward, no_record

__all__ = [
    "AutodiffError",
    "CheckpointError",
    "GradientTape",
    "OPS",
    "OptimizerState",
    "ShapeError",
    "Tensor",
    "active_tape",
    "backward",
    "check_function",
    "forward",
    "grad_check",
    "load_checkpoint",
    "no_record",
    "ops",
    "optimizer_step",
    "save_checkpoint",
]
