"""Run configuration for the batch commands.

Precedence, lowest first: JSON file, ``D_GAT_SEED`` (seed only), command-line flags.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..model import ModelConfig
from ..pipeline import TrainConfig

SEED_ENV = "D_GAT_SEED"
PATH_KEYS = ("dataset", "corpus", "zinc", "scheme", "checkpoint_in", "checkpoint_out", "split_in",
             "split_out", "log", "metrics")
INPUT_KEYS = ("dataset", "corpus", "zinc", "scheme", "checkpoint_in", "split_in")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    paths: dict[str, Optional[str]] = field(default_factory=dict)
    head: str = "task"

    def path(self, key: str) -> Optional[Path]:
        v = self.paths.get(key)
        return Path(v) if v else None

    def validate_paths(self, required: tuple[str, ...]) -> None:
        """Inputs must exist; outputs need an existing parent directory."""
        for key in required:
            if not self.paths.get(key):
                raise ConfigError(f"paths.{key} is required")
        for key, value in self.paths.items():
            if not value:
                continue
            p = Path(value)
            if key in INPUT_KEYS:
                if not p.is_file():
                    raise ConfigError(f"paths.{key}: no such file {p}")
            elif not p.parent.is_dir():
                raise ConfigError(f"paths.{key}: directory {p.parent} does not exist")


def _seed_from_env() -> Optional[int]:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def load_run_config(path: str | Path, overrides: Optional[dict] = None) -> RunConfig:
    """Parse and fully validate a run config. ``overrides`` hold flag values (None = unset)."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - {"seed", "model", "train", "paths", "head"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    seed = raw.get("seed")
    env_seed = _seed_from_env()
    if env_seed is not None:
        seed = env_seed
    if "seed" in overrides:
        seed = overrides.pop("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("a non-negative integer seed is mandatory")

    paths = dict(raw.get("paths") or {})
    bad = set(paths) - set(PATH_KEYS)
    if bad:
        raise ConfigError(f"unknown paths: {sorted(bad)}")
    base = Path(path).parent  # config paths are relative to the config file, flags to the cwd
    paths = {k: (str(base / v) if v and not Path(v).is_absolute() else v) for k, v in paths.items()}
    for key in PATH_KEYS:
        if key in overrides:
            paths[key] = str(overrides.pop(key))

    train = dict(raw.get("train") or {})
    if "seed" in train:
        raise ConfigError("set the seed at top level, not in train")
    train.update(overrides)
    try:
        model = ModelConfig.from_dict(raw.get("model") or {})
        train_cfg = TrainConfig.from_dict({**train, "seed": seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    head = raw.get("head", "task")
    if not isinstance(head, str) or not head:
        raise ConfigError("head must be a non-empty string")
    return RunConfig(seed=seed, model=model, train=train_cfg, paths=paths, head=head)
