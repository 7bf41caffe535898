from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


@dataclass(frozen=True)
class ModelConfig:
    """Network hyperparameters. Defaults are the published configuration."""

    d_model: int = 512
    n_layers: int = 4
    n_heads: int = 8
    dropout: float = 0.1
    post_residual: bool = False

    def __post_init__(self):
        if self.n_layers < 0:
            raise ValueError("n_layers must be >= 0")
        if self.d_model < 2 or self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} must be >= 2 and divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        """Small configuration used by tests and sanity runs."""
        base = dict(d_model=32, n_layers=3, n_heads=4, dropout=0.1)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
