"""Directed-edge graph representation.

Undirected bond ``k`` between atoms ``i < j`` becomes directed edges
``2k`` (i -> j) and ``2k + 1`` (j -> i), so ``reverse_of(e) == e ^ 1``.
Several molecules can be merged into one disjoint graph for batching;
``atom_mol`` records which molecule every atom belongs to.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .features import FeatureScheme
from .smiles import Molecule


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    n_atoms: int
    edge_src: np.ndarray
    edge_dst: np.ndarray
    reverse_of: np.ndarray
    atom_cats: np.ndarray
    bond_cats: np.ndarray  # per directed edge
    scheme: FeatureScheme
    atom_mol: np.ndarray
    n_mols: int = 1

    @property
    def n_directed_edges(self) -> int:
        return int(self.edge_src.shape[0])

    @cached_property
    def atom_feat(self) -> np.ndarray:
        return self.scheme.encode_atoms(self.atom_cats)

    @cached_property
    def bond_feat(self) -> np.ndarray:
        return self.scheme.encode_bonds(self.bond_cats)

    @cached_property
    def incoming(self) -> tuple[np.ndarray, ...]:
        """Directed-edge ids ending at each atom, ascending."""
        order = np.argsort(self.edge_dst, kind="stable")
        counts = np.bincount(self.edge_dst, minlength=self.n_atoms)
        return tuple(np.split(order, np.cumsum(counts)[:-1])) if self.n_atoms else ()

    @cached_property
    def bond_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded attention key sets for every directed edge: (index[2E, K], count[2E])."""
        return _pad([edge_neighborhood(self, e) for e in range(self.n_directed_edges)])

    @cached_property
    def atom_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """Key sets over ``concat(atom_states, bond_states)``: self then incoming edges."""
        n = self.n_atoms
        return _pad([[i] + [n + int(e) for e in self.incoming[i]] for i in range(n)])

    @cached_property
    def mol_keys(self) -> tuple[np.ndarray, np.ndarray]:
        """Key sets over ``concat(mol_states, atom_states)``: supervirtual node then its atoms."""
        m = self.n_mols
        members = [[b] for b in range(m)]
        for i, b in enumerate(self.atom_mol):
            members[int(b)].append(m + i)
        return _pad(members)

    def with_categories(self, atom_cats: np.ndarray, bond_cats: np.ndarray) -> "DirectedGraph":
        return replace(self, atom_cats=atom_cats, bond_cats=bond_cats)

    def permute_atoms(self, perm: Sequence[int]) -> "DirectedGraph":
        """Relabel atoms so that old atom ``perm[k]`` becomes new atom ``k``.

        Edge ids are kept; only endpoints and atom rows move.
        """
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        return replace(self, edge_src=inv[self.edge_src], edge_dst=inv[self.edge_dst],
                       atom_cats=self.atom_cats[perm], atom_mol=self.atom_mol[perm])


def _pad(rows: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    counts = np.array([len(r) for r in rows], dtype=np.int64)
    width = int(counts.max()) if rows else 1
    idx = np.zeros((len(rows), width), dtype=np.int64)
    for k, r in enumerate(rows):
        idx[k, :len(r)] = r
    return idx, counts


def build_directed_graph(mol: Molecule, scheme: FeatureScheme | None = None) -> DirectedGraph:
    scheme = scheme or FeatureScheme.default()
    n_bonds = mol.n_bonds
    src = np.empty(2 * n_bonds, dtype=np.int64)
    dst = np.empty(2 * n_bonds, dtype=np.int64)
    for k, b in enumerate(mol.bonds):
        src[2 * k], dst[2 * k] = b.i, b.j
        src[2 * k + 1], dst[2 * k + 1] = b.j, b.i
    bond_cats = np.repeat(scheme.bond_categories(mol), 2, axis=0)
    return DirectedGraph(
        n_atoms=mol.n_atoms,
        edge_src=src,
        edge_dst=dst,
        reverse_of=np.arange(2 * n_bonds, dtype=np.int64) ^ 1,
        atom_cats=scheme.atom_categories(mol),
        bond_cats=bond_cats,
        scheme=scheme,
        atom_mol=np.zeros(mol.n_atoms, dtype=np.int64),
    )


def graph_from_edges(n_atoms: int, bonds: Sequence[tuple[int, int]], atom_cats: np.ndarray,
                     bond_cats: np.ndarray, scheme: FeatureScheme) -> DirectedGraph:
    """Build a graph directly from an edge list and per-bond categories (no parsing)."""
    src = np.array([x for i, j in bonds for x in (i, j)], dtype=np.int64)
    dst = np.array([x for i, j in bonds for x in (j, i)], dtype=np.int64)
    return DirectedGraph(
        n_atoms=n_atoms, edge_src=src, edge_dst=dst,
        reverse_of=np.arange(src.size, dtype=np.int64) ^ 1,
        atom_cats=np.asarray(atom_cats, dtype=np.int64),
        bond_cats=np.repeat(np.asarray(bond_cats, dtype=np.int64), 2, axis=0),
        scheme=scheme, atom_mol=np.zeros(n_atoms, dtype=np.int64))


def edge_neighborhood(g: DirectedGraph, e: int) -> list[int]:
    """Attention key set of directed edge ``e``: itself plus edges entering its
    source atom, excluding the reverse of ``e``."""
    rev = int(g.reverse_of[e])
    return [int(e)] + [int(q) for q in g.incoming[int(g.edge_src[e])] if q != rev]


def merge_graphs(graphs: Sequence[DirectedGraph]) -> DirectedGraph:
    """Disjoint union of ``graphs``; molecule ``k`` keeps its order."""
    if not graphs:
        raise ValueError("cannot merge an empty list of graphs")
    scheme = graphs[0].scheme
    atom_off = np.cumsum([0] + [g.n_atoms for g in graphs])
    edge_off = np.cumsum([0] + [g.n_directed_edges for g in graphs])
    mol_off = np.cumsum([0] + [g.n_mols for g in graphs])
    for g in graphs:
        if g.scheme.hash != scheme.hash:
            raise ValueError("cannot merge graphs featurized with different schemes")
    return DirectedGraph(
        n_atoms=int(atom_off[-1]),
        edge_src=np.concatenate([g.edge_src + o for g, o in zip(graphs, atom_off)]),
        edge_dst=np.concatenate([g.edge_dst + o for g, o in zip(graphs, atom_off)]),
        reverse_of=np.concatenate([g.reverse_of + o for g, o in zip(graphs, edge_off)]),
        atom_cats=np.concatenate([g.atom_cats for g in graphs]),
        bond_cats=np.concatenate([g.bond_cats for g in graphs]).reshape(-1, len(scheme.bond_blocks)),
        scheme=scheme,
        atom_mol=np.concatenate([g.atom_mol + o for g, o in zip(graphs, mol_off)]),
        n_mols=int(mol_off[-1]),
    )
