"""Pretraining (masked-atom recovery + optional ZINC properties) and fine-tuning.

Randomness is derived from ``(seed, epoch)`` so runs are reproducible. With
``threads > 1`` each batch is cut into that many contiguous parts whose
gradients are computed concurrently and summed in part order; losses use the
whole batch's entry counts as normalizer, so the scale matches a single pass.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..model import DGAT, RECOVERY_HEAD, HeadInfo
from ..molgraph import DirectedGraph, FeatureScheme, Molecule, merge_graphs
from ..tensor import (Adam, NonFiniteError, Tape, Tensor, add, backward, bce_with_logits,
                      block_cross_entropy, mse, scale)
from ..tensor.serialize import atomic_write_bytes
from .data import ZINC_TASKS, Dataset
from .masking import make_mask_plan, single_atom_masks
from .metrics import MetricError, multitask
from .split import SplitAssignment

log = logging.getLogger(__name__)

ZINC_HEAD = "zinc"


class DivergenceError(RuntimeError):
    """Loss or parameters went non-finite; parameters hold the last finite state."""

    def __init__(self, message: str, epoch: int, checkpoint: Optional[str] = None):
        super().__init__(message)
        self.epoch = epoch
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    lam: float = 1.0  # weight of the ZINC property loss
    p_mask: float = 0.16
    p_rand: float = 0.04
    mask_repeats: int = 1  # independent mask plans per molecule and step
    size_filter: bool = False  # keep only 10-60 heavy atoms during pretraining
    min_atoms: int = 10
    max_atoms: int = 60
    patience: Optional[int] = 20
    backbone_lr_scale: float = 0.1  # 0 freezes the backbone
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    threads: int = 1

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        for name in ("p_mask", "p_rand", "backbone_lr_scale"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.p_mask + self.p_rand > 1.0:
            raise ValueError("p_mask + p_rand must not exceed 1")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.epochs < 0 or min(self.batch_size, self.threads, self.mask_repeats) < 1:
            raise ValueError("epochs >= 0; batch_size, threads and mask_repeats >= 1 are required")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be >= 1 or None")
        if self.min_atoms > self.max_atoms:
            raise ValueError("min_atoms > max_atoms")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    metrics: dict = field(default_factory=dict)


def _epoch_rngs(seed: int, epoch: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence([seed, epoch]).spawn(n)]


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    return [order[k:k + size] for k in range(0, len(order), size)]


def _parts(items: Sequence, n: int) -> list[Sequence]:
    n = max(1, min(n, len(items)))
    cuts = np.linspace(0, len(items), n + 1).round().astype(int)
    return [items[cuts[k]:cuts[k + 1]] for k in range(n)]


def _grads(parts: Sequence, loss_fn: Callable, threads: int) -> tuple[dict, list]:
    """Run ``loss_fn(part, k)`` under a tape per part; sum gradients in part order."""
    def work(args):
        k, part = args
        with Tape() as tape:
            loss, stats = loss_fn(part, k)
        return backward(tape, loss), stats

    jobs = list(enumerate(parts))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    total: dict[Tensor, np.ndarray] = {}
    for g, _ in results:
        for t, v in g.items():
            total[t] = total[t] + v if t in total else v
    return total, [s for _, s in results]


def _snapshot(model: DGAT) -> list[np.ndarray]:
    return [t.data.copy() for _, t in model.params.named_tensors()]


def _restore(model: DGAT, snap: list[np.ndarray]) -> None:
    for (_, t), saved in zip(model.params.named_tensors(), snap):
        t.data[:] = saved


_F32_MAX = float(np.finfo(np.float32).max)


def _finite(model: DGAT) -> bool:
    # checkpoints store f32, so anything beyond its range counts as diverged
    return all(np.abs(t.data).max(initial=0.0) <= _F32_MAX for _, t in model.params.named_tensors())


def _write_log(path, entries: list[dict]) -> None:
    if path is not None:
        text = "".join(json.dumps(e, sort_keys=True) + "\n" for e in entries)
        atomic_write_bytes(path, text.encode())


def _diverged(model: DGAT, snap, epoch: int, checkpoint, why: str):
    _restore(model, snap)
    where = None
    if checkpoint is not None:
        model.save(checkpoint)
        where = str(checkpoint)
    return DivergenceError(f"training diverged in epoch {epoch}: {why}", epoch, where)


def _step(model: DGAT, opt: Adam, parts, loss_fn, threads: int, epoch: int, checkpoint):
    snap = _snapshot(model)
    try:
        grads, stats = _grads(parts, loss_fn, threads)
    except NonFiniteError as exc:
        raise _diverged(model, snap, epoch, checkpoint, str(exc)) from exc
    if not all(np.isfinite(g).all() for g in grads.values()):
        raise _diverged(model, snap, epoch, checkpoint, "non-finite gradient")
    opt.step(grads)
    if not _finite(model):
        raise _diverged(model, snap, epoch, checkpoint, "non-finite parameters after update")
    return stats


# pretraining ---------------------------------------------------------------

def size_filter(mols: Sequence[Molecule], lo: int, hi: int) -> list[int]:
    return [k for k, m in enumerate(mols) if lo <= m.n_atoms <= hi]


def _standardize(y: np.ndarray) -> tuple[list[float], list[float]]:
    mean, std = [], []
    for k in range(y.shape[1]):
        col = y[:, k][~np.isnan(y[:, k])]
        mu = float(col.mean()) if col.size else 0.0
        sd = float(col.std()) if col.size > 1 else 1.0
        mean.append(mu)
        std.append(sd if sd > 1e-12 else 1.0)
    return mean, std


def pretrain(model: DGAT, mols: Sequence[Molecule], cfg: TrainConfig,
             zinc_targets: Optional[np.ndarray] = None, log_path=None, checkpoint_path=None) -> TrainResult:
    """Masked-atom recovery, plus ``lam`` x MSE on standardized ZINC properties when given.

    ``zinc_targets`` is ``(len(mols), 3)`` with NaN for missing values. Fresh
    mask plans are drawn every epoch.
    """
    keep = list(range(len(mols)))
    if cfg.size_filter:
        keep = size_filter(mols, cfg.min_atoms, cfg.max_atoms)
        log.info("size filter kept %d of %d molecules", len(keep), len(mols))
    if not keep:
        raise ValueError("pretraining corpus is empty")
    graphs = [model.graph(mols[k]) for k in keep]
    y = None
    if zinc_targets is not None:
        zinc_targets = np.asarray(zinc_targets, dtype=np.float64)
        if zinc_targets.shape != (len(mols), len(ZINC_TASKS)):
            raise ValueError(f"zinc targets must be ({len(mols)}, {len(ZINC_TASKS)})")
        y = zinc_targets[keep]
    if RECOVERY_HEAD not in model.params.heads:
        model.add_recovery_head(seed=cfg.seed + 1)
    if y is not None:
        if ZINC_HEAD not in model.params.heads:
            mean, std = _standardize(y)
            model.add_task_head(ZINC_HEAD, HeadInfo(list(ZINC_TASKS), ["regression"] * 3, mean, std),
                                seed=cfg.seed + 2)
        info = model.head_info[ZINC_HEAD]
        y = (y - np.array(info.mean)) / np.array(info.std)

    opt = Adam([t for _, t in model.params.named_tensors()], lr=cfg.lr)
    layout = model.scheme.atom_layout
    result = TrainResult()
    for epoch in range(1, cfg.epochs + 1):
        shuffle_rng, mask_rng, drop_seed = _epoch_rngs(cfg.seed, epoch, 3)
        sums = {"recovery": 0.0, "property": 0.0, "n_sel": 0, "n_prop": 0, "hits": 0}
        for b, batch in enumerate(_batches(shuffle_rng.permutation(len(graphs)), cfg.batch_size)):
            batch = np.repeat(batch, cfg.mask_repeats)
            masked = [make_mask_plan(graphs[k], mask_rng, cfg.p_mask, cfg.p_rand) for k in batch]
            n_sel = sum(int(p.selected.sum()) for p, _ in masked)
            ybatch = y[batch] if y is not None else None
            n_prop = int((~np.isnan(ybatch)).sum()) if ybatch is not None and cfg.lam else 0
            items = list(zip(batch, masked))
            seeds = drop_seed.integers(0, 2**63, size=cfg.threads)

            def loss_fn(part, k):
                g = merge_graphs([mg for _, (_, mg) in part])
                sel = np.concatenate([p.selected for _, (p, _) in part])
                targets = np.concatenate([p.targets for _, (p, _) in part])
                res = model.forward(g, "train", np.random.default_rng(seeds[k]))
                logits = model.atom_logits(res)
                rec = block_cross_entropy(logits, targets, layout, sel, normalizer=n_sel)
                hits = _recovered(logits.data, targets, layout)[sel].sum()
                loss, prop = rec, 0.0
                if n_prop and cfg.lam:
                    yp = y[[i for i, _ in part]]
                    lab = ~np.isnan(yp)
                    if lab.any():
                        pl = mse(model.graph_outputs(res, ZINC_HEAD), np.nan_to_num(yp), lab, normalizer=n_prop)
                        loss = add(rec, scale(pl, cfg.lam))
                        prop = pl.item()
                return loss, (rec.item(), prop, int(hits))

            stats = _step(model, opt, _parts(items, cfg.threads), loss_fn, cfg.threads, epoch,
                          checkpoint_path)
            sums["recovery"] += sum(s[0] for s in stats) * n_sel
            sums["property"] += sum(s[1] for s in stats) * n_prop
            sums["hits"] += sum(s[2] for s in stats)
            sums["n_sel"] += n_sel
            sums["n_prop"] += n_prop
        entry = {
            "epoch": epoch,
            "losses": {"recovery": sums["recovery"] / sums["n_sel"]},
            "metrics": {"masked_accuracy": sums["hits"] / sums["n_sel"]},
        }
        if sums["n_prop"]:
            entry["losses"]["property"] = sums["property"] / sums["n_prop"]
        result.log.append(entry)
        _write_log(log_path, result.log)
    result.best_epoch = cfg.epochs
    return result


def _recovered(logits: np.ndarray, targets: np.ndarray, layout) -> np.ndarray:
    """Per row: True when every block's argmax over non-MASK slots hits the target."""
    ok = np.ones(logits.shape[0], dtype=bool)
    for b, (o, s) in enumerate(layout):
        ok &= logits[:, o:o + s - 1].argmax(axis=1) == targets[:, b]
    return ok


def recovery_accuracy(model: DGAT, mols: Sequence[Molecule]) -> float:
    """Fraction of atoms whose categories are all recovered when masked alone.

    Each atom of each molecule is masked in its own copy (incident bonds
    masked too), and the model runs in eval mode. No randomness involved.
    """
    hits = total = 0
    for m in mols:
        g = model.graph(m)
        merged, rows = single_atom_masks(g)
        logits = model.atom_logits(model.forward(merged)).data[rows]
        hits += int(_recovered(logits, g.atom_cats, model.scheme.atom_layout).sum())
        total += g.n_atoms
    return hits / total


# fine-tuning ---------------------------------------------------------------

def predict_dataset(model: DGAT, graphs: Sequence[DirectedGraph], head: str, chunk: int = 256) -> np.ndarray:
    """Head outputs for every graph: probabilities / de-standardized values."""
    out = [model.predict(merge_graphs(list(graphs[k:k + chunk])), head) for k in range(0, len(graphs), chunk)]
    width = len(model.head_info[head].tasks)
    return np.concatenate(out) if out else np.zeros((0, width))


def evaluate(model: DGAT, ds: Dataset, idx: Optional[Sequence[int]] = None, head: str = "task",
             graphs: Optional[Sequence[DirectedGraph]] = None) -> dict:
    """ROC-AUC for binary tasks, RMSE and MAE for regression tasks, on ``idx``."""
    idx = list(range(len(ds))) if idx is None else list(idx)
    if not idx:
        return {}
    graphs = [model.graph(ds.records[i].mol) for i in idx] if graphs is None else [graphs[i] for i in idx]
    pred = predict_dataset(model, graphs, head)
    target = ds.targets(idx)
    kinds = np.array(ds.schema.kinds)
    out = {}
    for kind, metrics in (("binary", ("roc_auc",)), ("regression", ("rmse", "mae"))):
        cols = np.flatnonzero(kinds == kind)
        if not cols.size:
            continue
        names = [ds.schema.names[c] for c in cols]
        for metric in metrics:
            try:
                out[metric] = multitask(metric, pred[:, cols], target[:, cols], names)
            except MetricError as exc:
                log.warning("%s unavailable: %s", metric, exc)
                out[metric] = {"metric": metric, "per_task": {n: None for n in names}, "mean": None}
    return out


def _selection_score(metrics: dict) -> Optional[float]:
    if metrics.get("roc_auc", {}).get("mean") is not None:
        return metrics["roc_auc"]["mean"]
    if metrics.get("rmse", {}).get("mean") is not None:
        return -metrics["rmse"]["mean"]
    return None


def finetune(model: DGAT, ds: Dataset, split: SplitAssignment, cfg: TrainConfig, head: str = "task",
             scheme: Optional[FeatureScheme] = None, log_path=None, checkpoint_path=None) -> TrainResult:
    """Train a single linear head (backbone at ``backbone_lr_scale`` x lr) with early stopping.

    Model selection uses the validation ROC-AUC (binary tasks) or RMSE
    (regression), falling back to the training loss when validation cannot
    be scored. The best parameters are restored and rounded to checkpoint
    precision, so re-evaluating a saved checkpoint reproduces the metrics.
    """
    if scheme is not None:
        model.check_scheme(scheme)
    if len(split.partition) != len(ds):
        raise ValueError(f"split covers {len(split.partition)} records, dataset has {len(ds)}")
    train_idx, valid_idx, test_idx = (split.indices(p) for p in ("train", "valid", "test"))
    if not train_idx:
        raise ValueError("empty training partition")
    schema = ds.schema
    kinds = np.array(schema.kinds)
    y_train = ds.targets(train_idx)
    mean, std = _standardize(y_train)
    for k, kind in enumerate(kinds):
        if kind == "binary":
            mean[k], std[k] = 0.0, 1.0
    existing = model.head_info.get(head)
    if existing is None or list(existing.tasks) != list(schema.names):
        model.add_task_head(head, HeadInfo(list(schema.names), list(schema.kinds), mean, std), seed=cfg.seed + 2)
    else:
        existing.mean, existing.std = mean, std
    info = model.head_info[head]
    y_all = ds.targets()
    y_std = (y_all - np.array(info.mean)) / np.array(info.std)
    bin_cols = kinds == "binary"
    graphs = [model.graph(r.mol) for r in ds.records]

    head_params = [t for _, t in model.params.head_tensors([head])]
    groups = [(head_params, cfg.lr)]
    if cfg.backbone_lr_scale > 0:
        groups.append(([t for _, t in model.params.backbone_tensors()], cfg.lr * cfg.backbone_lr_scale))
    opt = Adam(groups)

    result = TrainResult()
    metrics0 = {"train": evaluate(model, ds, train_idx, head, graphs),
                "valid": evaluate(model, ds, valid_idx, head, graphs)}
    result.log.append({"epoch": 0, "losses": {}, "metrics": metrics0})
    best = _selection_score(metrics0["valid"])
    best_loss = math.inf
    best_snap, best_epoch, stale = _snapshot(model), 0, 0
    for epoch in range(1, cfg.epochs + 1):
        shuffle_rng, drop_seed = _epoch_rngs(cfg.seed, epoch, 2)
        order = np.array(train_idx)[shuffle_rng.permutation(len(train_idx))]
        total, count = 0.0, 0
        for batch in _batches(order, cfg.batch_size):
            lab = ~np.isnan(y_std[batch])
            n_bin = int((lab & bin_cols).sum())
            n_reg = int((lab & ~bin_cols).sum())
            seeds = drop_seed.integers(0, 2**63, size=cfg.threads)

            def loss_fn(part, k):
                res = model.forward(merge_graphs([graphs[i] for i in part]), "train",
                                    np.random.default_rng(seeds[k]))
                out = model.graph_outputs(res, head)
                yp = y_std[part]
                lp = ~np.isnan(yp)
                terms = []
                if n_bin and (lp & bin_cols).any():
                    terms.append(bce_with_logits(out, np.nan_to_num(yp), lp & bin_cols, normalizer=n_bin))
                if n_reg and (lp & ~bin_cols).any():
                    terms.append(mse(out, np.nan_to_num(yp), lp & ~bin_cols, normalizer=n_reg))
                loss = terms[0] if len(terms) == 1 else add(terms[0], terms[1])
                return loss, loss.item()

            parts = [p for p in _parts(list(batch), cfg.threads) if (~np.isnan(y_std[p])).any()]
            stats = _step(model, opt, parts, loss_fn, cfg.threads, epoch, checkpoint_path)
            total += sum(stats) * len(batch)
            count += len(batch)
        train_loss = total / count
        valid_metrics = evaluate(model, ds, valid_idx, head, graphs)
        result.log.append({"epoch": epoch, "losses": {"train": train_loss}, "metrics": {"valid": valid_metrics}})
        _write_log(log_path, result.log)
        score = _selection_score(valid_metrics)
        if score is not None and (best is None or score > best):
            improved = True
        elif score is None and best is None:
            improved = train_loss < best_loss
        else:
            improved = False
        best_loss = min(best_loss, train_loss)
        if improved:
            best, best_snap, best_epoch, stale = score, _snapshot(model), epoch, 0
        else:
            stale += 1
            if cfg.patience is not None and stale >= cfg.patience:
                log.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                break
    _restore(model, best_snap)
    model.round_to_checkpoint_precision()
    result.best_epoch = best_epoch
    result.metrics = {p: evaluate(model, ds, idx, head, graphs)
                      for p, idx in (("train", train_idx), ("valid", valid_idx), ("test", test_idx))}
    result.log.append({"epoch": "final", "best_epoch": best_epoch, "metrics": result.metrics})
    _write_log(log_path, result.log)
    return result
