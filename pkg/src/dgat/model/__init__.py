"""Directed-bond attention model and its task heads."""

from .config import ModelConfig
from .dgat import DGAT, RECOVERY_HEAD, HeadInfo, SchemeMismatch
from .network import (ForwardResult, GraphState, atom_layer, bond_layer, forward, init_states,
                      predict_atoms, predict_graph, readout_layer)
from .params import AttentionParams, LayerParams, Linear, ModelParams, UpdateParams

__all__ = [
    "AttentionParams", "DGAT", "ForwardResult", "GraphState", "HeadInfo", "LayerParams", "Linear",
    "ModelConfig", "ModelParams", "RECOVERY_HEAD", "SchemeMismatch", "UpdateParams", "atom_layer",
    "bond_layer", "forward", "init_states", "predict_atoms", "predict_graph", "readout_layer",
]
