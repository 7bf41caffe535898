"""One-hot featurization of atoms and bonds.

A :class:`FeatureScheme` is an ordered list of categorical blocks. Every
block owns a vocabulary, an optional OTHER slot for out-of-vocabulary values
and a trailing MASK slot used by masked pretraining. Block order and
vocabulary order are part of the checkpoint contract.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .smiles import AtomRecord, BondRecord, Molecule


@dataclass(frozen=True)
class Block:
    name: str
    vocab: tuple
    other: bool = True

    @property
    def size(self) -> int:
        return len(self.vocab) + int(self.other) + 1

    @property
    def other_index(self) -> int:
        if not self.other:
            raise ValueError(f"block {self.name!r} has no OTHER category")
        return len(self.vocab)

    @property
    def mask_index(self) -> int:
        return self.size - 1

    @property
    def n_valid(self) -> int:
        """Number of non-MASK categories."""
        return self.size - 1

    def index(self, value: Any) -> int:
        for k, v in enumerate(self.vocab):
            if type(v) is type(value) and v == value:
                return k
        return self.other_index


ATOM_ATTRS = {
    "element": "element",
    "degree": "degree",
    "formal_charge": "charge",
    "h_count": "h_count",
    "aromatic": "aromatic",
    "in_ring": "in_ring",
}
BOND_ATTRS = {"order": "order", "in_ring": "in_ring", "conjugated": "conjugated"}


@dataclass(frozen=True)
class FeatureScheme:
    atom_blocks: tuple[Block, ...]
    bond_blocks: tuple[Block, ...]
    _hash: str = field(default="", compare=False, repr=False)

    @classmethod
    def default(cls) -> "FeatureScheme":
        return cls(
            atom_blocks=(
                Block("element", ("C", "N", "O", "S", "F", "Cl", "Br", "I", "P", "B", "Si", "Se")),
                Block("degree", (0, 1, 2, 3, 4, 5)),
                Block("formal_charge", (-2, -1, 0, 1, 2)),
                Block("h_count", (0, 1, 2, 3, 4)),
                Block("aromatic", (False, True), other=False),
                Block("in_ring", (False, True), other=False),
            ),
            bond_blocks=(
                Block("order", ("single", "double", "triple", "aromatic"), other=False),
                Block("in_ring", (False, True), other=False),
                Block("conjugated", (False, True), other=False),
            ),
        )

    @property
    def atom_dim(self) -> int:
        return sum(b.size for b in self.atom_blocks)

    @property
    def bond_dim(self) -> int:
        return sum(b.size for b in self.bond_blocks)

    @property
    def atom_layout(self) -> list[tuple[int, int]]:
        """(offset, size) of each atom block inside the atom vector."""
        return _layout(self.atom_blocks)

    @property
    def bond_layout(self) -> list[tuple[int, int]]:
        return _layout(self.bond_blocks)

    def to_dict(self) -> dict:
        def dump(blocks):
            return [{"name": b.name, "vocab": list(b.vocab), "other": b.other} for b in blocks]
        return {"atom_blocks": dump(self.atom_blocks), "bond_blocks": dump(self.bond_blocks)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScheme":
        def load(items, attrs):
            blocks = []
            for item in items:
                if item["name"] not in attrs:
                    raise ValueError(f"unknown feature block {item['name']!r}")
                blocks.append(Block(item["name"], tuple(item["vocab"]), bool(item.get("other", True))))
            return tuple(blocks)
        return cls(load(d["atom_blocks"], ATOM_ATTRS), load(d["bond_blocks"], BOND_ATTRS))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def load(cls, path: str | Path) -> "FeatureScheme":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @property
    def hash(self) -> str:
        if not self._hash:
            digest = hashlib.sha256(self.to_json().encode()).hexdigest()[:16]
            object.__setattr__(self, "_hash", digest)
        return self._hash

    def atom_categories(self, mol: Molecule) -> np.ndarray:
        """Category index per atom and block, shape (N, n_atom_blocks)."""
        return np.array([[b.index(getattr(a, ATOM_ATTRS[b.name])) for b in self.atom_blocks]
                         for a in mol.atoms], dtype=np.int64).reshape(mol.n_atoms, len(self.atom_blocks))

    def bond_categories(self, mol: Molecule) -> np.ndarray:
        return np.array([[b.index(getattr(bd, BOND_ATTRS[b.name])) for b in self.bond_blocks]
                         for bd in mol.bonds], dtype=np.int64).reshape(mol.n_bonds, len(self.bond_blocks))

    def encode_atoms(self, cats: np.ndarray) -> np.ndarray:
        return _one_hot(cats, self.atom_layout, self.atom_dim)

    def encode_bonds(self, cats: np.ndarray) -> np.ndarray:
        return _one_hot(cats, self.bond_layout, self.bond_dim)

    def atom_mask_row(self) -> np.ndarray:
        return np.array([b.mask_index for b in self.atom_blocks], dtype=np.int64)

    def bond_mask_row(self) -> np.ndarray:
        return np.array([b.mask_index for b in self.bond_blocks], dtype=np.int64)


def _layout(blocks: Sequence[Block]) -> list[tuple[int, int]]:
    out, offset = [], 0
    for b in blocks:
        out.append((offset, b.size))
        offset += b.size
    return out


def _one_hot(cats: np.ndarray, layout: list[tuple[int, int]], dim: int) -> np.ndarray:
    out = np.zeros((cats.shape[0], dim), dtype=np.float64)
    rows = np.arange(cats.shape[0])
    for k, (offset, size) in enumerate(layout):
        if cats.shape[0] and (cats[:, k].min() < 0 or cats[:, k].max() >= size):
            raise ValueError(f"category out of range in block {k}")
        out[rows, offset + cats[:, k]] = 1.0
    return out


def featurize(mol: Molecule, scheme: FeatureScheme | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(atom_feat, bond_feat)``; bond rows follow ``mol.bonds`` order."""
    scheme = scheme or FeatureScheme.default()
    return (scheme.encode_atoms(scheme.atom_categories(mol)),
            scheme.encode_bonds(scheme.bond_categories(mol)))


__all__ = ["Block", "FeatureScheme", "featurize", "AtomRecord", "BondRecord"]
