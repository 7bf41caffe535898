"""Batch command-line interface.

Exit codes: 0 ok, 2 input error, 3 feature-scheme mismatch, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..model import DGAT, SchemeMismatch
from ..molgraph import FeatureScheme, SmilesError, build_directed_graph, parse_smiles
from ..pipeline import (PARTITIONS, ZINC_TASKS, DatasetError, DivergenceError, SplitAssignment,
                        TaskSchema, evaluate, finetune, load_dataset, load_smiles_corpus,
                        load_zinc_targets, pretrain, scaffold_split)
from ..tensor.serialize import CheckpointError, atomic_write_bytes
from .config import ConfigError, RunConfig, load_run_config

EXIT_OK, EXIT_INPUT, EXIT_SCHEME, EXIT_DIVERGED = 0, 2, 3, 4

log = logging.getLogger("dgat")


class InputError(ValueError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _load_scheme(path: Optional[Path]) -> Optional[FeatureScheme]:
    if path is None:
        return None
    try:
        return FeatureScheme.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad feature scheme {path}: {exc}") from exc


def _load_model(path: Path) -> DGAT:
    try:
        return DGAT.load(path)
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed checkpoint {path}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read checkpoint {path}: {exc}") from exc


def _write_json(path: Optional[Path], obj) -> None:
    if path is not None:
        atomic_write_bytes(path, (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode())


# commands ------------------------------------------------------------------

def cmd_featurize(args) -> int:
    scheme = _load_scheme(Path(args.scheme) if args.scheme else None) or FeatureScheme.default()
    out = Path(args.out)
    if not out.parent.is_dir():
        raise InputError(f"output directory {out.parent} does not exist")
    ds = load_smiles_corpus(args.dataset)
    lines = []
    for r in ds.records:
        g = build_directed_graph(r.mol, scheme)
        lines.append(_dump({"row": r.row, "smiles": r.smiles, "n_atoms": g.n_atoms, "n_bonds": r.mol.n_bonds,
                            "n_directed_edges": g.n_directed_edges, "scheme_hash": scheme.hash}))
    atomic_write_bytes(out, ("\n".join(lines) + "\n").encode())
    print(f"featurized {len(lines)} molecules, {ds.n_failed} failures", file=sys.stderr)
    return EXIT_OK


def _new_model(cfg: RunConfig) -> DGAT:
    return DGAT(cfg.model, _load_scheme(cfg.path("scheme")), seed=cfg.seed)


def _start_model(cfg: RunConfig) -> DGAT:
    if cfg.path("checkpoint_in") is None:
        return _new_model(cfg)
    model = _load_model(cfg.path("checkpoint_in"))
    scheme = _load_scheme(cfg.path("scheme"))
    if scheme is not None:
        model.check_scheme(scheme)
    if model.config != cfg.model:
        log.warning("using the checkpoint's model config %s", model.config.to_dict())
    return model


def cmd_pretrain(args) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    cfg.validate_paths(("corpus", "checkpoint_out"))
    mols = load_smiles_corpus(cfg.path("corpus")).mols
    targets = None
    if cfg.path("zinc") is not None:
        zinc = load_zinc_targets(cfg.path("zinc"))
        targets = np.vstack([np.full((len(mols), len(ZINC_TASKS)), np.nan), zinc.targets()])
        mols = mols + zinc.mols
    model = _start_model(cfg)
    result = pretrain(model, mols, cfg.train, targets, log_path=cfg.path("log"),
                      checkpoint_path=cfg.path("checkpoint_out"))
    model.save(cfg.path("checkpoint_out"))
    summary = {"epochs": cfg.train.epochs, "final": result.log[-1] if result.log else None}
    _write_json(cfg.path("metrics"), summary)
    print(_dump(summary))
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg = load_run_config(args.config, _overrides(args))
    cfg.validate_paths(("dataset", "checkpoint_out"))
    model = _start_model(cfg)
    schema = None
    if cfg.head in model.head_info:
        info = model.head_info[cfg.head]
        schema = TaskSchema(tuple(info.tasks), tuple(info.kinds))
    ds = load_dataset(cfg.path("dataset"), schema)
    if cfg.path("split_in") is not None:
        split = SplitAssignment.load(cfg.path("split_in"), len(ds))
    else:
        split = scaffold_split(ds.mols, cfg.train.ratios, cfg.seed)
    if cfg.path("split_out") is not None:
        split.save(cfg.path("split_out"))
    result = finetune(model, ds, split, cfg.train, head=cfg.head, log_path=cfg.path("log"),
                      checkpoint_path=cfg.path("checkpoint_out"))
    model.save(cfg.path("checkpoint_out"))
    summary = {"best_epoch": result.best_epoch, "metrics": result.metrics, "split": split.sizes()}
    _write_json(cfg.path("metrics"), summary)
    print(_dump(summary))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _load_model(Path(args.checkpoint))
    scheme = _load_scheme(Path(args.scheme) if args.scheme else None)
    if scheme is not None:
        model.check_scheme(scheme)
    if args.head not in model.head_info:
        raise InputError(f"checkpoint has no task head {args.head!r}")
    info = model.head_info[args.head]
    ds = load_dataset(args.dataset, TaskSchema(tuple(info.tasks), tuple(info.kinds)))
    if args.split:
        split = SplitAssignment.load(args.split, len(ds))
        idx = list(range(len(ds))) if args.partition == "all" else split.indices(args.partition)
    else:
        idx = list(range(len(ds)))
    metrics = evaluate(model, ds, idx, args.head)
    for name, m in sorted(metrics.items()):
        for task, value in m["per_task"].items():
            print(f"{name}\t{task}\t{value}")
        print(f"{name}\tmean\t{m['mean']}")
    print(_dump(metrics))
    return EXIT_OK


def cmd_predict(args) -> int:
    model = _load_model(Path(args.checkpoint))
    if args.head not in model.head_info:
        raise InputError(f"checkpoint has no task head {args.head!r}")
    mols = [parse_smiles(s) for s in args.smiles]
    pred = model.predict(model.graph(mols), args.head)
    tasks = model.head_info[args.head].tasks
    for s, row in zip(args.smiles, pred):
        print(_dump({"smiles": s, "outputs": dict(zip(tasks, (float(v) for v in row)))}))
    return EXIT_OK


# argument parsing ------------------------------------------------------------

def _overrides(args) -> dict:
    keys = ("seed", "epochs", "lr", "batch_size", "threads", "checkpoint_in", "checkpoint_out", "log")
    return {k: getattr(args, k, None) for k in keys}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="JSON run config")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--threads", type=int, help="deterministic parallel gradient parts per batch")
    p.add_argument("--checkpoint-in", dest="checkpoint_in")
    p.add_argument("--checkpoint-out", dest="checkpoint_out")
    p.add_argument("--log")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgat", description="Directed-bond attention models for molecular properties.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="parse and featurize a CSV, write graph summaries")
    p.add_argument("dataset")
    p.add_argument("--scheme", help="feature scheme JSON (default scheme if omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("pretrain", help="masked-atom (+ ZINC property) pretraining")
    _add_run_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="scaffold-split fine-tuning of a task head")
    _add_run_flags(p)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--split", help="split JSON written by finetune")
    p.add_argument("--partition", default="test", choices=PARTITIONS + ("all",))
    p.add_argument("--head", default="task")
    p.add_argument("--scheme")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="per-task outputs for SMILES strings")
    p.add_argument("checkpoint")
    p.add_argument("smiles", nargs="+")
    p.add_argument("--head", default="task")
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except SchemeMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEME
    except DivergenceError as exc:
        where = f" (last finite state saved to {exc.checkpoint})" if exc.checkpoint else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, InputError, DatasetError, SmilesError, CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
