"""Atom masking for the recovery pretraining task."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..molgraph import DirectedGraph

KEEP, MASK, RANDOMIZE = 0, 1, 2


@dataclass
class MaskPlan:
    actions: np.ndarray  # per atom: KEEP / MASK / RANDOMIZE
    targets: np.ndarray  # original categories of every atom, (N, n_atom_blocks)

    @property
    def selected(self) -> np.ndarray:
        return self.actions != KEEP

    def digest(self) -> str:
        return hashlib.blake2b(self.actions.astype(np.int8).tobytes(), digest_size=8).hexdigest()


def make_mask_plan(g: DirectedGraph, rng: np.random.Generator, p_mask: float = 0.16,
                   p_rand: float = 0.04) -> tuple[MaskPlan, DirectedGraph]:
    """Draw keep/mask/randomize i.i.d. per atom and apply it.

    Every molecule in ``g`` gets at least one selected atom: if the draw picks
    none, one atom chosen uniformly is masked. Bonds touching a selected atom
    get MASK categories in both directions.
    """
    if not (0.0 <= p_mask and 0.0 <= p_rand and p_mask + p_rand <= 1.0):
        raise ValueError(f"bad mask rates p_mask={p_mask}, p_rand={p_rand}")
    n = g.n_atoms
    if n == 0:
        raise ValueError("cannot mask an empty graph")
    u = rng.random(n)
    actions = np.where(u < p_mask, MASK, np.where(u < p_mask + p_rand, RANDOMIZE, KEEP)).astype(np.int64)
    hit = np.bincount(g.atom_mol[actions != KEEP], minlength=g.n_mols)
    for m in np.flatnonzero(hit == 0):
        members = np.flatnonzero(g.atom_mol == m)
        if members.size:
            actions[members[rng.integers(members.size)]] = MASK

    scheme = g.scheme
    atom_cats = g.atom_cats.copy()
    atom_cats[actions == MASK] = scheme.atom_mask_row()
    rand_rows = np.flatnonzero(actions == RANDOMIZE)
    if rand_rows.size:
        atom_cats[rand_rows] = np.stack(
            [rng.integers(0, b.n_valid, size=rand_rows.size) for b in scheme.atom_blocks], axis=1)
    selected = actions != KEEP
    bond_cats = g.bond_cats.copy()
    touched = selected[g.edge_src] | selected[g.edge_dst]
    bond_cats[touched] = scheme.bond_mask_row()
    return MaskPlan(actions, g.atom_cats.copy()), g.with_categories(atom_cats, bond_cats)


def single_atom_masks(g: DirectedGraph) -> tuple[DirectedGraph, np.ndarray]:
    """One copy of single-molecule ``g`` per atom, with only that atom masked.

    Returns the merged graph and, per copy, the index of its masked atom in the
    merged numbering. Used to score recovery deterministically.
    """
    from ..molgraph import merge_graphs

    copies, rows = [], []
    offset = 0
    for i in range(g.n_atoms):
        actions = np.zeros(g.n_atoms, dtype=np.int64)
        actions[i] = MASK
        atom_cats = g.atom_cats.copy()
        atom_cats[i] = g.scheme.atom_mask_row()
        bond_cats = g.bond_cats.copy()
        bond_cats[(g.edge_src == i) | (g.edge_dst == i)] = g.scheme.bond_mask_row()
        copies.append(g.with_categories(atom_cats, bond_cats))
        rows.append(offset + i)
        offset += g.n_atoms
    return merge_graphs(copies), np.array(rows, dtype=np.int64)
