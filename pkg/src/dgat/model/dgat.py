from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..molgraph import DirectedGraph, FeatureScheme, Molecule, build_directed_graph, merge_graphs
from ..tensor import serialize
from .config import ModelConfig
from .network import ForwardResult, forward, predict_atoms, predict_graph
from .params import ModelParams

CHECKPOINT_VERSION = 1
RECOVERY_HEAD = "recovery"


class SchemeMismatch(ValueError):
    """Checkpoint and data were featurized with different schemes."""


@dataclass
class HeadInfo:
    """Task metadata for a graph-level head; ``mean``/``std`` de-standardise regression outputs."""

    tasks: list[str]
    kinds: list[str]  # "binary" | "regression"
    mean: list[float] = field(default_factory=list)
    std: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.tasks) != len(self.kinds):
            raise ValueError("tasks and kinds differ in length")
        if not self.mean:
            self.mean = [0.0] * len(self.tasks)
        if not self.std:
            self.std = [1.0] * len(self.tasks)


class DGAT:
    def __init__(self, config: ModelConfig, scheme: Optional[FeatureScheme] = None, seed: int = 0,
                 params: Optional[ModelParams] = None):
        self.config = config
        self.scheme = scheme or FeatureScheme.default()
        self.params = params or ModelParams.init(config, self.scheme.atom_dim, self.scheme.bond_dim, seed)
        self.head_info: dict[str, HeadInfo] = {}

    def graph(self, mols: Molecule | Sequence[Molecule]) -> DirectedGraph:
        if isinstance(mols, Molecule):
            return build_directed_graph(mols, self.scheme)
        return merge_graphs([build_directed_graph(m, self.scheme) for m in mols])

    def check_scheme(self, scheme: FeatureScheme) -> None:
        if scheme.hash != self.scheme.hash:
            raise SchemeMismatch(f"feature scheme {scheme.hash} != model scheme {self.scheme.hash}")

    def forward(self, g: DirectedGraph, mode: str = "eval", rng=None, trace: bool = False) -> ForwardResult:
        self.check_scheme(g.scheme)
        return forward(g, self.params, self.config, mode, rng, trace)

    def add_recovery_head(self, seed: int) -> None:
        self.params.add_head(RECOVERY_HEAD, self.scheme.atom_dim, seed)

    def add_task_head(self, name: str, info: HeadInfo, seed: int, zero: bool = False) -> None:
        self.params.add_head(name, len(info.tasks), seed, zero=zero)
        self.head_info[name] = info

    def atom_logits(self, result: ForwardResult):
        return predict_atoms(result.state.atoms, self.params.heads[RECOVERY_HEAD])

    def graph_outputs(self, result: ForwardResult, head: str):
        return predict_graph(result.state.mol, self.params.heads[head])

    def predict(self, g: DirectedGraph, head: str) -> np.ndarray:
        """Per-molecule outputs: probabilities for binary tasks, original units for regression."""
        raw = self.graph_outputs(self.forward(g), head).data
        info = self.head_info[head]
        out = np.empty_like(raw)
        for k, kind in enumerate(info.kinds):
            if kind == "binary":
                out[:, k] = 1.0 / (1.0 + np.exp(-raw[:, k]))
            else:
                out[:, k] = raw[:, k] * info.std[k] + info.mean[k]
        return out

    # checkpoints -----------------------------------------------------------

    def manifest(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "feature_scheme_hash": self.scheme.hash,
            "feature_scheme": self.scheme.to_dict(),
            "D_h": self.config.d_model,
            "layers": self.config.n_layers,
            "heads": self.config.n_heads,
            "config": self.config.to_dict(),
            "head_outputs": {name: h.weight.shape[1] for name, h in self.params.heads.items()},
            "head_info": {name: asdict(info) for name, info in sorted(self.head_info.items())},
        }

    def to_bytes(self) -> bytes:
        tensors = {name: t.data for name, t in self.params.named_tensors()}
        return serialize.encode(tensors, self.manifest())

    def save(self, path: str | Path) -> None:
        serialize.atomic_write_bytes(path, self.to_bytes())

    def round_to_checkpoint_precision(self) -> None:
        """Round parameters to f32 in place, as a save/load cycle would."""
        for _, t in self.params.named_tensors():
            t.data[:] = t.data.astype(np.float32)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DGAT":
        manifest, tensors = serialize.decode(data)
        if manifest.get("version") != CHECKPOINT_VERSION:
            raise serialize.CheckpointError(f"unsupported checkpoint version {manifest.get('version')}")
        scheme = FeatureScheme.from_dict(manifest["feature_scheme"])
        if scheme.hash != manifest["feature_scheme_hash"]:
            raise serialize.CheckpointError("feature scheme does not match its recorded hash")
        model = cls(ModelConfig.from_dict(manifest["config"]), scheme)
        for name, width in sorted(manifest["head_outputs"].items()):
            model.params.add_head(name, width, seed=0)
        for name, info in manifest["head_info"].items():
            model.head_info[name] = HeadInfo(**info)
        named = dict(model.params.named_tensors())
        if set(named) != set(tensors):
            raise serialize.CheckpointError("checkpoint tensor names do not match the model layout")
        for name, t in named.items():
            if t.shape != tensors[name].shape:
                raise serialize.CheckpointError(f"{name}: shape {tensors[name].shape} != {t.shape}")
            t.data[:] = tensors[name]
        return model

    @classmethod
    def load(cls, path: str | Path) -> "DGAT":
        return cls.from_bytes(Path(path).read_bytes())
