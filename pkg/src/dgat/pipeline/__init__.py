"""Datasets, scaffold splits, masking, training loops and metrics."""

from .data import (ZINC_TASKS, Dataset, DatasetError, Record, TaskSchema, load_dataset,
                   load_smiles_corpus, load_zinc_targets)
from .masking import KEEP, MASK, RANDOMIZE, MaskPlan, make_mask_plan, single_atom_masks
from .metrics import MetricError, mae, midranks, multitask, rmse, roc_auc
from .split import PARTITIONS, SplitAssignment, scaffold_groups, scaffold_split
from .train import (ZINC_HEAD, DivergenceError, TrainConfig, TrainResult, evaluate, finetune,
                    predict_dataset, pretrain, recovery_accuracy, size_filter)

__all__ = [
    "Dataset", "DatasetError", "DivergenceError", "KEEP", "MASK", "MaskPlan", "MetricError",
    "PARTITIONS", "RANDOMIZE", "Record", "SplitAssignment", "TaskSchema", "TrainConfig", "TrainResult",
    "ZINC_HEAD", "ZINC_TASKS", "evaluate", "finetune", "load_dataset", "load_smiles_corpus",
    "load_zinc_targets", "mae", "make_mask_plan", "midranks", "multitask", "predict_dataset",
    "pretrain", "recovery_accuracy", "rmse", "roc_auc", "scaffold_groups", "scaffold_split",
    "single_atom_masks", "size_filter",
]
