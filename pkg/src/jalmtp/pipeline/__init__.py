"""Experiment config, training, checkpoints, prediction export, evaluation and plots."""

from .config import ConfigError, ExperimentConfig
from .run import PredictionRecord, evaluate, evaluate_predictions, load_predictions, plot, predict, \
    save_predictions
from .train import TrainResult, batch_order, load, save, train, train_step, write_log

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PredictionRecord",
    "TrainResult",
    "batch_order",
    "evaluate",
    "evaluate_predictions",
    "load",
    "load_predictions",
    "plot",
    "predict",
    "save",
    "save_predictions",
    "train",
    "train_step",
    "write_log",
]
