"""Network components: encoders, social-to-lane fusion, recurrent lane attention, selectors."""

from .network import JalMTP, ModelConfig, Prediction, Prepared, make_batch, prepare, prepare_training
from .params import ParamStore

__all__ = [
    "JalMTP",
    "ModelConfig",
    "ParamStore",
    "Prediction",
    "Prepared",
    "make_batch",
    "prepare",
    "prepare_training",
]
