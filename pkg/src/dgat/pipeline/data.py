"""CSV ingestion for property datasets and the ZINC pretraining targets."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..molgraph import Molecule, SmilesError, parse_smiles

log = logging.getLogger(__name__)

KINDS = ("binary", "regression")
ZINC_TASKS = ("logP", "SAS", "QED")
ID_COLUMNS = ("mol_id",)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSchema:
    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.kinds):
            raise ValueError("names and kinds differ in length")
        for k in self.kinds:
            if k not in KINDS:
                raise ValueError(f"unknown task kind {k!r}")

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def binary(cls, *names: str) -> "TaskSchema":
        return cls(tuple(names), ("binary",) * len(names))

    @classmethod
    def regression(cls, *names: str) -> "TaskSchema":
        return cls(tuple(names), ("regression",) * len(names))


@dataclass
class Record:
    smiles: str
    mol: Molecule
    targets: np.ndarray  # NaN where missing
    row: int  # 0-based data row in the source file

    @property
    def labeled(self) -> np.ndarray:
        return ~np.isnan(self.targets)


@dataclass
class Dataset:
    records: list[Record]
    schema: TaskSchema
    provenance: str = ""
    n_failed: int = 0
    failures: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def mols(self) -> list[Molecule]:
        return [r.mol for r in self.records]

    def targets(self, idx: Optional[Sequence[int]] = None) -> np.ndarray:
        recs = self.records if idx is None else [self.records[i] for i in idx]
        return np.array([r.targets for r in recs], dtype=np.float64).reshape(len(recs), len(self.schema))

    def subset(self, idx: Sequence[int]) -> "Dataset":
        return Dataset([self.records[i] for i in idx], self.schema, self.provenance)


def _cell(value: str, kind: str, where: str) -> float:
    value = value.strip()
    if value == "":
        return math.nan
    try:
        x = float(value)
    except ValueError:
        raise DatasetError(f"{where}: not a number: {value!r}") from None
    if not math.isfinite(x):
        raise DatasetError(f"{where}: non-finite label {value!r}")
    if kind == "binary" and x not in (0.0, 1.0):
        raise DatasetError(f"{where}: binary label must be 0 or 1, got {value!r}")
    return x


def _infer_kind(column: list[str]) -> str:
    vals = {v.strip() for v in column if v.strip()}
    return "binary" if vals and vals <= {"0", "1", "0.0", "1.0"} else "regression"


def load_dataset(path: str | Path, schema: Optional[TaskSchema] = None,
                 require_label: bool = True) -> Dataset:
    """Read ``smiles,<task>...``; empty cells are missing labels.

    Without ``schema`` every column except ``smiles`` and id columns is a task,
    binary when its values are all 0/1. Unparseable SMILES are logged and
    skipped. With ``require_label`` rows that have no label at all are skipped too.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "smiles" not in header:
        raise DatasetError(f"{path}: no 'smiles' column in header")
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    col = {h: k for k, h in enumerate(header)}
    if schema is None:
        names = [h for h in header if h != "smiles" and h not in ID_COLUMNS]
        kinds = [_infer_kind([r[col[n]] if col[n] < len(r) else "" for r in body]) for n in names]
        schema = TaskSchema(tuple(names), tuple(kinds))
    missing = [n for n in schema.names if n not in col]
    if missing:
        raise DatasetError(f"{path}: missing task columns {missing}")

    records, failures = [], []
    n_unlabeled = 0
    for k, row in enumerate(body):
        row = row + [""] * (len(header) - len(row))
        smiles = row[col["smiles"]].strip()
        try:
            mol = parse_smiles(smiles)
        except SmilesError as exc:
            log.warning("%s row %d: %s", path.name, k + 1, exc)
            failures.append((k, str(exc)))
            continue
        targets = np.array([_cell(row[col[n]], kind, f"{path.name} row {k + 1} column {n}")
                            for n, kind in zip(schema.names, schema.kinds)], dtype=np.float64)
        if require_label and len(schema) and np.isnan(targets).all():
            n_unlabeled += 1
            continue
        records.append(Record(smiles, mol, targets, k))
    if failures:
        log.warning("%s: skipped %d unparseable rows of %d", path.name, len(failures), len(body))
    if n_unlabeled:
        log.warning("%s: skipped %d rows without any label", path.name, n_unlabeled)
    if not records:
        raise DatasetError(f"{path}: no usable rows")
    return Dataset(records, schema, provenance=path.name, n_failed=len(failures), failures=failures)


def load_zinc_targets(path: str | Path) -> Dataset:
    """ZINC property file: ``smiles,logP,SAS,QED``."""
    return load_dataset(path, TaskSchema.regression(*ZINC_TASKS))


def load_smiles_corpus(path: str | Path) -> Dataset:
    """Pretraining corpus: only the ``smiles`` column is read."""
    return load_dataset(path, TaskSchema((), ()), require_label=False)
