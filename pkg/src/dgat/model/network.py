"""Forward pass: input projections, then per layer bond -> atom -> supervirtual-node updates.

Every attention site uses the same pattern: queries from the state being
updated, keys/values from a ragged neighbour set, multi-head scaled
dot-product attention, then ``W2 relu(W1 LayerNorm(h + m))``.

Key sets per site:

* bond ``i -> j``: itself plus edges ``k -> i`` with ``k != j`` (old bond states);
* atom ``i``: its own old state plus the *new* states of edges ``k -> i``;
* supervirtual node: its old state plus the *new* states of all its atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..molgraph import DirectedGraph
from ..tensor import (Tensor, add, concat_rows, dropout, gather_rows, layer_norm, matmul,
                      neighbor_attention, relu)
from .config import ModelConfig
from .params import AttentionParams, LayerParams, Linear, ModelParams, UpdateParams


@dataclass
class GraphState:
    bonds: Tensor  # (2E, D_h), row e = directed edge e
    atoms: Tensor  # (N, D_h)
    mol: Tensor  # (n_mols, D_h)


@dataclass
class ForwardResult:
    state: GraphState
    layers: list[GraphState] = field(default_factory=list)  # index t = state after layer t
    attention: list[dict[str, np.ndarray]] = field(default_factory=list)


def _check_dims(g: DirectedGraph, p: ModelParams) -> None:
    a, b = g.scheme.atom_dim, g.scheme.bond_dim
    if p.atom_input.shape[0] != a or p.bond_input.shape[0] != 2 * a + b:
        raise ValueError(f"feature dims (atom {a}, bond {b}) do not match the input transforms "
                         f"{p.atom_input.shape}, {p.bond_input.shape}")


def init_states(g: DirectedGraph, p: ModelParams) -> GraphState:
    """Project raw features: bond ``i -> j`` sees ``[F_i, F_ij, F_j]``; atoms see ``F_i``."""
    _check_dims(g, p)
    af = g.atom_feat
    bond_in = np.concatenate([af[g.edge_src], g.bond_feat, af[g.edge_dst]], axis=1)
    return GraphState(
        bonds=matmul(Tensor(bond_in), p.bond_input),
        atoms=matmul(Tensor(af), p.atom_input),
        mol=gather_rows(p.s0, np.zeros(g.n_mols, dtype=np.int64)),
    )


def _attend(queries: Tensor, sources: Tensor, attn: AttentionParams, keys, cfg: ModelConfig,
            training: bool, rng) -> tuple[Tensor, np.ndarray]:
    q = matmul(queries, attn.wq)
    k = matmul(sources, attn.wk)
    v = matmul(sources, attn.wv)
    return neighbor_attention(q, k, v, keys[0], keys[1], cfg.n_heads, cfg.dropout, training, rng)


def _update(h: Tensor, m: Tensor, upd: UpdateParams, cfg: ModelConfig, training: bool, rng) -> Tensor:
    hidden = relu(upd.mlp1(layer_norm(add(h, m), upd.ln_gain, upd.ln_bias)))
    out = upd.mlp2(dropout(hidden, cfg.dropout, training, rng))
    return add(out, h) if cfg.post_residual else out


def bond_layer(g: DirectedGraph, state: GraphState, lp: LayerParams, cfg: ModelConfig,
               training: bool = False, rng=None) -> tuple[Tensor, np.ndarray]:
    m, alpha = _attend(state.bonds, state.bonds, lp.attn["bond"], g.bond_keys, cfg, training, rng)
    return _update(state.bonds, m, lp.update["bond"], cfg, training, rng), alpha


def atom_layer(g: DirectedGraph, state: GraphState, new_bonds: Tensor, lp: LayerParams,
               cfg: ModelConfig, training: bool = False, rng=None) -> tuple[Tensor, np.ndarray]:
    sources = concat_rows([state.atoms, new_bonds])
    m, alpha = _attend(state.atoms, sources, lp.attn["atom"], g.atom_keys, cfg, training, rng)
    return _update(state.atoms, m, lp.update["atom"], cfg, training, rng), alpha


def readout_layer(g: DirectedGraph, state: GraphState, new_atoms: Tensor, lp: LayerParams,
                  cfg: ModelConfig, training: bool = False, rng=None) -> tuple[Tensor, np.ndarray]:
    sources = concat_rows([state.mol, new_atoms])
    m, alpha = _attend(state.mol, sources, lp.attn["mol"], g.mol_keys, cfg, training, rng)
    return _update(state.mol, m, lp.update["mol"], cfg, training, rng), alpha


def forward(g: DirectedGraph, p: ModelParams, cfg: ModelConfig, mode: str = "eval",
            rng: Optional[np.random.Generator] = None, trace: bool = False) -> ForwardResult:
    """Run all interaction layers. ``mode="train"`` enables dropout and needs ``rng``."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    training = mode == "train" and cfg.dropout > 0.0
    if training and rng is None:
        raise ValueError("training mode needs an rng for dropout")
    if g.n_atoms == 0:
        raise ValueError("empty graph")
    if len(p.layers) != cfg.n_layers:
        raise ValueError(f"params have {len(p.layers)} layers, config says {cfg.n_layers}")
    state = init_states(g, p)
    result = ForwardResult(state)
    if trace:
        result.layers.append(state)
    for lp in p.layers:
        bonds, a_bond = bond_layer(g, state, lp, cfg, training, rng)
        atoms, a_atom = atom_layer(g, state, bonds, lp, cfg, training, rng)
        mol, a_mol = readout_layer(g, state, atoms, lp, cfg, training, rng)
        state = GraphState(bonds, atoms, mol)
        if trace:
            result.layers.append(state)
            result.attention.append({"bond": a_bond, "atom": a_atom, "mol": a_mol})
    result.state = state
    return result


def predict_graph(mol_repr: Tensor, head: Linear) -> Tensor:
    """Graph-level outputs (logits for binary tasks, standardised values for regression)."""
    if head.weight.shape[0] != mol_repr.shape[1]:
        raise ValueError(f"head expects width {head.weight.shape[0]}, got {mol_repr.shape[1]}")
    return head(mol_repr)


def predict_atoms(atom_states: Tensor, head: Linear) -> Tensor:
    """Per-atom logits laid out like the atom feature vector (one softmax per block)."""
    if head.weight.shape[0] != atom_states.shape[1]:
        raise ValueError(f"head expects width {head.weight.shape[0]}, got {atom_states.shape[1]}")
    return head(atom_states)
