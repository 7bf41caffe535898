"""Bemis-Murcko scaffolds keyed by a Weisfeiler-Lehman style graph hash."""

from __future__ import annotations

import hashlib

from .smiles import Molecule

EMPTY_SCAFFOLD = ""


def _mix(*parts: object) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def scaffold_atoms(mol: Molecule) -> tuple[set[int], list[tuple[int, int, str]]]:
    """Atoms and bonds surviving side-chain pruning (ring systems + linkers)."""
    alive = set(range(mol.n_atoms))
    adj = [set(nb) for nb in mol.neighbors()]
    ring = [a.in_ring for a in mol.atoms]
    frontier = [a for a in alive if len(adj[a]) <= 1 and not ring[a]]
    while frontier:
        nxt = []
        for a in frontier:
            if a not in alive:
                continue
            alive.discard(a)
            for b in adj[a]:
                adj[b].discard(a)
                if len(adj[b]) <= 1 and not ring[b] and b in alive:
                    nxt.append(b)
            adj[a].clear()
        frontier = nxt
    bonds = [(b.i, b.j, b.order) for b in mol.bonds if b.i in alive and b.j in alive]
    return alive, bonds


def murcko_scaffold(mol: Molecule) -> str:
    """Canonical key of the Murcko framework; acyclic molecules give ``EMPTY_SCAFFOLD``.

    Labels start from (element, aromatic) and are refined for at most ``2N`` rounds
    with the multiset of (bond order, neighbour label) pairs.
    """
    if not any(a.in_ring for a in mol.atoms):
        return EMPTY_SCAFFOLD
    alive, bonds = scaffold_atoms(mol)
    atoms = sorted(alive)
    nbrs: dict[int, list[tuple[str, int]]] = {a: [] for a in atoms}
    for i, j, order in bonds:
        nbrs[i].append((order, j))
        nbrs[j].append((order, i))
    label = {a: _mix(mol.atoms[a].element, mol.atoms[a].aromatic) for a in atoms}
    n_classes = len(set(label.values()))
    for _ in range(2 * len(atoms)):
        new = {a: _mix(label[a], tuple(sorted((o, label[b]) for o, b in nbrs[a]))) for a in atoms}
        label = new
        # a stable partition cannot refine further
        refined = len(set(label.values()))
        if refined == n_classes:
            break
        n_classes = refined
    final = _mix(len(atoms), len(bonds), tuple(sorted(label.values())))
    return f"{final:016x}"
