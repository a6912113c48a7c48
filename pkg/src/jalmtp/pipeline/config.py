"""Experiment configuration, stored as a JSON object."""

import json
from dataclasses import asdict, dataclass, field, fields

from ..model.network import ModelConfig
from ..scenario import TEMPLATES, TF, TP


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int = 0
    d: int = 64
    H: int = 50
    max_N: int = 10
    K: int = 6
    Tp: int = TP
    Tf: int = TF
    lambda1: float = 1.0
    lambda2: float = 1.0
    lr: float = 1e-3
    batch_size: int = 8
    steps: int = 2000
    threshold: float = 7.5
    waypoint_weight: float = 0.5
    lookahead: int = 10
    template_mix: dict = field(default_factory=lambda: {"straight": 1.0, "fork": 1.0})
    data_path: str = ""
    out_dir: str = ""
    log_every: int = 100

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.Tp != TP or self.Tf != TF:
            raise ConfigError(f"Tp and Tf are fixed by the data format ({TP}, {TF}), got {self.Tp}, {self.Tf}")
        for name in ("d", "H", "max_N", "K", "batch_size", "log_every", "lookahead"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.d % 4 or self.d < 4:
            raise ConfigError(f"d must be a positive multiple of 4, got {self.d}")
        if self.H < 2:
            raise ConfigError(f"H must be >= 2, got {self.H}")
        if self.threshold <= 0 or self.lr < 0:
            raise ConfigError("threshold must be > 0 and lr >= 0")
        for name in ("lambda1", "lambda2", "waypoint_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        bad = [t for t in self.template_mix if t not in TEMPLATES]
        if bad:
            raise ConfigError(f"unknown template(s) {bad}; choose from {', '.join(TEMPLATES)}")
        return self

    def model(self):
        return ModelConfig(d=self.d, K=self.K, H=self.H, max_N=self.max_N, threshold=self.threshold,
                           lambda1=self.lambda1, lambda2=self.lambda2,
                           waypoint_weight=self.waypoint_weight, lookahead=self.lookahead)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except ValueError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)
