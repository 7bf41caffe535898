"""Scaffold split: molecules sharing a scaffold never straddle partitions."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..molgraph import Molecule, murcko_scaffold
from ..tensor.serialize import atomic_write_bytes

PARTITIONS = ("train", "valid", "test")


@dataclass
class SplitAssignment:
    partition: list[str]
    keys: list[str]

    def indices(self, name: str) -> list[int]:
        return [k for k, p in enumerate(self.partition) if p == name]

    def sizes(self) -> dict[str, int]:
        return {p: self.partition.count(p) for p in PARTITIONS}

    def to_json(self) -> str:
        return json.dumps({str(k): p for k, p in enumerate(self.partition)}, indent=0)

    def save(self, path: str | Path) -> None:
        atomic_write_bytes(path, self.to_json().encode())

    @classmethod
    def from_json(cls, text: str, n_records: int | None = None) -> "SplitAssignment":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("split file must be a JSON object {record_index: partition}")
        n = len(raw) if n_records is None else n_records
        part = [""] * n
        for k, p in raw.items():
            i = int(k)
            if not 0 <= i < n:
                raise ValueError(f"split index {i} out of range for {n} records")
            if p not in PARTITIONS:
                raise ValueError(f"unknown partition {p!r}")
            part[i] = p
        if "" in part:
            raise ValueError("split file does not cover every record")
        return cls(part, [""] * n)

    @classmethod
    def load(cls, path: str | Path, n_records: int | None = None) -> "SplitAssignment":
        return cls.from_json(Path(path).read_text(), n_records)


def scaffold_groups(keys: Sequence[str], seed: int) -> list[list[int]]:
    """Groups ordered by size (largest first); equal sizes are shuffled by ``seed``."""
    by_key: dict[str, list[int]] = defaultdict(list)
    for i, k in enumerate(keys):
        by_key[k].append(i)
    groups = sorted(by_key.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    rng = np.random.default_rng(seed)
    out: list[list[int]] = []
    start = 0
    while start < len(groups):
        stop = start
        while stop < len(groups) and len(groups[stop][1]) == len(groups[start][1]):
            stop += 1
        tier = [g for _, g in groups[start:stop]]
        out.extend(tier[i] for i in rng.permutation(len(tier)))
        start = stop
    return out


def scaffold_split(mols: Sequence[Molecule], ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
                   seed: int = 0) -> SplitAssignment:
    """Fill train, then valid, then test with whole scaffold groups.

    A group goes to the first partition it fits into without exceeding that
    partition's quota; whatever is left lands in test.
    """
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    keys = [murcko_scaffold(m) for m in mols]
    groups = scaffold_groups(keys, seed)
    if len(groups) < 3:
        raise ValueError(f"scaffold split needs at least 3 scaffold groups, found {len(groups)}")
    n = len(keys)
    cap = (ratios[0] * n, ratios[1] * n)
    part = [""] * n
    filled = [0, 0]
    for g in groups:
        if filled[0] + len(g) <= cap[0]:
            dest = 0
        elif filled[1] + len(g) <= cap[1]:
            dest = 1
        else:
            dest = 2
        if dest < 2:
            filled[dest] += len(g)
        for i in g:
            part[i] = PARTITIONS[dest]
    return SplitAssignment(part, keys)
