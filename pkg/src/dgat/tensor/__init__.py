"""Dense 2-D tensors with reverse-mode autodiff, losses and Adam."""

from . import kernels
from .core import NonFiniteError, ShapeError, Tape, Tensor, active_tape, backward
from .losses import bce_with_logits, block_cross_entropy, mse
from .ops import (add, concat_cols, concat_rows, dropout, gather_rows, layer_norm, masked_row_softmax,
                  matmul, mean_all, mul, neighbor_attention, relu, scale, scatter_add_rows, sigmoid,
                  sub, sum_all)
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Adam", "AdamState", "NonFiniteError", "ShapeError", "Tape", "Tensor", "active_tape", "adam_step",
    "add", "backward", "bce_with_logits", "block_cross_entropy", "concat_cols", "concat_rows",
    "dropout", "gather_rows", "kernels", "layer_norm", "masked_row_softmax", "matmul", "mean_all",
    "mse", "mul", "neighbor_attention", "relu", "scale", "scatter_add_rows", "sigmoid", "sub",
    "sum_all",
]
