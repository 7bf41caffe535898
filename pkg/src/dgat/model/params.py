"""Parameter containers for the network and its task heads.

Weights are stored input-major (``x @ W``), i.e. transposed with respect to
the column-vector convention ``W x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from ..tensor import Tensor, add, matmul
from .config import ModelConfig


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-a, a, size=(fan_in, fan_out)), requires_grad=True, name=name)


def _const(value: float, width: int, name: str) -> Tensor:
    return Tensor(np.full((1, width), value), requires_grad=True, name=name)


@dataclass
class Linear:
    weight: Tensor
    bias: Optional[Tensor] = None

    @classmethod
    def init(cls, rng, fan_in: int, fan_out: int, name: str, bias: bool = True) -> "Linear":
        return cls(_glorot(rng, fan_in, fan_out, f"{name}.weight"),
                   _const(0.0, fan_out, f"{name}.bias") if bias else None)

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.weight)
        return add(y, self.bias) if self.bias is not None else y

    def tensors(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.weight", self.weight
        if self.bias is not None:
            yield f"{prefix}.bias", self.bias


@dataclass
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor

    @classmethod
    def init(cls, rng, d: int, name: str) -> "AttentionParams":
        return cls(*(_glorot(rng, d, d, f"{name}.{w}") for w in ("wq", "wk", "wv")))

    def tensors(self, prefix: str):
        yield f"{prefix}.wq", self.wq
        yield f"{prefix}.wk", self.wk
        yield f"{prefix}.wv", self.wv


@dataclass
class UpdateParams:
    """LayerNorm(h + m) followed by the two-layer ReLU MLP."""

    ln_gain: Tensor
    ln_bias: Tensor
    mlp1: Linear
    mlp2: Linear

    @classmethod
    def init(cls, rng, d: int, name: str) -> "UpdateParams":
        return cls(_const(1.0, d, f"{name}.ln_gain"), _const(0.0, d, f"{name}.ln_bias"),
                   Linear.init(rng, d, d, f"{name}.mlp1"), Linear.init(rng, d, d, f"{name}.mlp2"))

    def tensors(self, prefix: str):
        yield f"{prefix}.ln_gain", self.ln_gain
        yield f"{prefix}.ln_bias", self.ln_bias
        yield from self.mlp1.tensors(f"{prefix}.mlp1")
        yield from self.mlp2.tensors(f"{prefix}.mlp2")


SITES = ("bond", "atom", "mol")


@dataclass
class LayerParams:
    attn: dict[str, AttentionParams]
    update: dict[str, UpdateParams]

    @classmethod
    def init(cls, rng, d: int, name: str) -> "LayerParams":
        attn, update = {}, {}
        for site in SITES:
            attn[site] = AttentionParams.init(rng, d, f"{name}.{site}.attn")
            update[site] = UpdateParams.init(rng, d, f"{name}.{site}.update")
        return cls(attn, update)

    def tensors(self, prefix: str):
        for site in SITES:
            yield from self.attn[site].tensors(f"{prefix}.{site}.attn")
            yield from self.update[site].tensors(f"{prefix}.{site}.update")


@dataclass
class ModelParams:
    bond_input: Tensor  # (2 * D_atom + D_bond, D_h)
    atom_input: Tensor  # (D_atom, D_h)
    s0: Tensor  # (1, D_h), shared by every molecule
    layers: list[LayerParams]
    heads: dict[str, Linear] = field(default_factory=dict)

    @classmethod
    def init(cls, config: ModelConfig, atom_dim: int, bond_dim: int, seed: int) -> "ModelParams":
        rng = np.random.default_rng(seed)
        d = config.d_model
        return cls(
            bond_input=_glorot(rng, 2 * atom_dim + bond_dim, d, "bond_input"),
            atom_input=_glorot(rng, atom_dim, d, "atom_input"),
            s0=Tensor(rng.normal(0.0, 1.0 / np.sqrt(d), size=(1, d)), requires_grad=True, name="s0"),
            layers=[LayerParams.init(rng, d, f"layers.{t}") for t in range(config.n_layers)],
        )

    def add_head(self, name: str, out_dim: int, seed: int, zero: bool = False) -> Linear:
        d = self.s0.shape[1]
        head = Linear.init(np.random.default_rng(seed), d, out_dim, f"heads.{name}")
        if zero:
            head.weight.data[:] = 0.0
        self.heads[name] = head
        return head

    def backbone_tensors(self) -> Iterator[tuple[str, Tensor]]:
        yield "bond_input", self.bond_input
        yield "atom_input", self.atom_input
        yield "s0", self.s0
        for t, layer in enumerate(self.layers):
            yield from layer.tensors(f"layers.{t}")

    def head_tensors(self, names=None) -> Iterator[tuple[str, Tensor]]:
        for name in sorted(self.heads):
            if names is None or name in names:
                yield from self.heads[name].tensors(f"heads.{name}")

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        return list(self.backbone_tensors()) + list(self.head_tensors())
