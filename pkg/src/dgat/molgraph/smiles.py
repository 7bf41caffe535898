"""SMILES subset parser producing heavy-atom molecular graphs.

Supported: organic-subset atoms (B C N O P S F Cl Br I and aromatic
b c n o p s), bracket atoms with isotope/charge/H-count/class, bond symbols
``- = # :``, stereo bonds ``/ \\`` (read as single), branches, ring closures
(single digits and ``%nn``) and ``.`` disconnections.

Aromaticity is taken literally from lowercase atoms; no kekulization.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

logger = logging.getLogger(__name__)

BOND_ORDERS = ("single", "double", "triple", "aromatic")
_BOND_SYMBOLS = {"-": "single", "=": "double", "#": "triple", ":": "aromatic",
                 "/": "single", "\\": "single"}
_VALENCE_UNITS = {"single": 1, "double": 2, "triple": 3}

ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
DEFAULT_VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

ELEMENTS = frozenset("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu
Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba
La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi
Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr
""".split())
_AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")


class SmilesError(ValueError):
    """Raised for input outside the supported grammar; ``offset`` is a byte offset."""

    def __init__(self, message: str, text: str, index: int):
        self.offset = len(text[:index].encode("utf-8"))
        self.text = text
        super().__init__(f"{message} at byte {self.offset} in {text!r}")


@dataclass(frozen=True)
class AtomRecord:
    element: str
    charge: int = 0
    h_count: int = 0
    aromatic: bool = False
    degree: int = 0
    in_ring: bool = False


@dataclass(frozen=True)
class BondRecord:
    i: int
    j: int
    order: str = "single"
    in_ring: bool = False
    conjugated: bool = False


@dataclass(frozen=True)
class Molecule:
    atoms: tuple[AtomRecord, ...]
    bonds: tuple[BondRecord, ...]
    smiles: str = ""

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.i].append(b.j)
            adj[b.j].append(b.i)
        return adj


@dataclass
class _Atom:
    element: str
    aromatic: bool
    bracket: bool
    charge: int = 0
    h_count: Optional[int] = None
    pos: int = 0


@dataclass
class _Bond:
    i: int
    j: int
    order: str
    explicit: bool


def _parse_bracket(text: str, start: int) -> tuple[_Atom, int]:
    end = text.find("]", start)
    if end < 0:
        raise SmilesError("unterminated bracket atom", text, start)
    body = text[start + 1:end]
    k = 0
    while k < len(body) and body[k].isdigit():
        k += 1  # isotope, ignored
    symbol = None
    aromatic = False
    for cand in _AROMATIC_BRACKET:
        if body.startswith(cand, k):
            symbol, aromatic = cand.capitalize(), True
            break
    if symbol is None:
        for width in (2, 1):
            cand = body[k:k + width]
            if len(cand) == width and cand in ELEMENTS:
                symbol = cand
                break
    if symbol is None:
        raise SmilesError(f"unknown element in [{body}]", text, start + 1 + k)
    k += len(symbol)
    if body.startswith("@", k):
        warnings.warn("chirality ignored", stacklevel=3)
        while k < len(body) and (body[k] == "@" or body[k].isalnum()) and body[k] != "H":
            k += 1
    h_count = 0
    if body.startswith("H", k):
        k += 1
        digits = k
        while k < len(body) and body[k].isdigit():
            k += 1
        h_count = int(body[digits:k]) if k > digits else 1
    charge = 0
    if k < len(body) and body[k] in "+-":
        sign = 1 if body[k] == "+" else -1
        ch = body[k]
        k += 1
        digits = k
        while k < len(body) and body[k].isdigit():
            k += 1
        if k > digits:
            charge = sign * int(body[digits:k])
        else:
            mag = 1
            while k < len(body) and body[k] == ch:
                mag += 1
                k += 1
            charge = sign * mag
    if body.startswith(":", k):
        k += 1
        while k < len(body) and body[k].isdigit():
            k += 1
    if k != len(body):
        raise SmilesError(f"unparseable bracket atom [{body}]", text, start + 1 + k)
    return _Atom(symbol, aromatic, True, charge, h_count, start), end + 1


def _find_ring_bonds(n: int, bonds: list[_Bond]) -> list[bool]:
    """Mark bonds that lie on a cycle (i.e. are not bridges)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, b in enumerate(bonds):
        adj[b.i].append((b.j, k))
        adj[b.j].append((b.i, k))
    disc = [-1] * n
    low = [0] * n
    is_bridge = [False] * len(bonds)
    counter = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == via:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = counter
                    counter += 1
                    stack.append((w, k, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        is_bridge[via] = True
    return [not br for br in is_bridge]


def parse_smiles(text: str) -> Molecule:
    """Parse ``text`` into a :class:`Molecule` with implicit hydrogens as counts."""
    atoms: list[_Atom] = []
    bonds: list[_Bond] = []
    seen_pairs: set[tuple[int, int]] = set()
    branches: list[tuple[Optional[int], int]] = []
    rings: dict[int, tuple[int, Optional[str], int]] = {}
    prev: Optional[int] = None
    pending: Optional[str] = None
    pending_pos = 0
    stereo_warned = False

    def add_bond(a: int, b: int, order: Optional[str], pos: int) -> None:
        if a == b:
            raise SmilesError("self-bond", text, pos)
        key = (min(a, b), max(a, b))
        if key in seen_pairs:
            raise SmilesError("duplicate bond", text, pos)
        seen_pairs.add(key)
        explicit = order is not None
        if order is None:
            order = "aromatic" if atoms[a].aromatic and atoms[b].aromatic else "single"
        if order == "aromatic" and not (atoms[a].aromatic and atoms[b].aromatic):
            raise SmilesError("aromatic bond between non-aromatic atoms", text, pos)
        bonds.append(_Bond(key[0], key[1], order, explicit))

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[" or ch.isalpha():
            if ch == "[":
                atom, nxt = _parse_bracket(text, i)
            elif text.startswith(("Cl", "Br"), i):
                atom, nxt = _Atom(text[i:i + 2], False, False, pos=i), i + 2
            elif ch in ORGANIC:
                atom, nxt = _Atom(ch, False, False, pos=i), i + 1
            elif ch in AROMATIC_ORGANIC:
                atom, nxt = _Atom(ch.upper(), True, False, pos=i), i + 1
            else:
                raise SmilesError(f"unknown element token {ch!r}", text, i)
            atoms.append(atom)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, pending_pos if pending else i)
            elif pending is not None:
                raise SmilesError("bond without preceding atom", text, pending_pos)
            prev, pending = idx, None
            i = nxt
        elif ch in _BOND_SYMBOLS:
            if pending is not None or prev is None:
                raise SmilesError("misplaced bond symbol", text, i)
            if ch in "/\\" and not stereo_warned:
                warnings.warn("stereo bond markers ignored", stacklevel=2)
                stereo_warned = True
            pending, pending_pos = _BOND_SYMBOLS[ch], i
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesError("ring closure without atom", text, i)
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesError("malformed %nn ring closure", text, i)
                num, width = int(digits), 3
            else:
                num, width = int(ch), 1
            if num in rings:
                other, order, opos = rings.pop(num)
                if order and pending and order != pending:
                    raise SmilesError("conflicting ring-closure bond orders", text, i)
                add_bond(other, prev, order or pending, i)
            else:
                rings[num] = (prev, pending, i)
            pending = None
            i += width
        elif ch == "(":
            if prev is None or pending is not None:
                raise SmilesError("misplaced '('", text, i)
            branches.append((prev, i))
            i += 1
        elif ch == ")":
            if not branches:
                raise SmilesError("unbalanced ')'", text, i)
            if pending is not None:
                raise SmilesError("dangling bond before ')'", text, pending_pos)
            prev = branches.pop()[0]
            i += 1
        elif ch == ".":
            if pending is not None or prev is None:
                raise SmilesError("misplaced '.'", text, i)
            prev = None
            i += 1
        else:
            raise SmilesError(f"unexpected character {ch!r}", text, i)

    if branches:
        raise SmilesError("unbalanced '('", text, branches[-1][1])
    if rings:
        num, (_, _, pos) = min(rings.items(), key=lambda kv: kv[1][2])
        raise SmilesError(f"unmatched ring-closure {num}", text, pos)
    if pending is not None:
        raise SmilesError("dangling bond at end of input", text, pending_pos)
    if not atoms:
        raise SmilesError("empty SMILES", text, 0)

    ring_flags = _find_ring_bonds(len(atoms), bonds)
    for k, b in enumerate(bonds):
        # implicit bonds between aromatic atoms of different rings are single
        if b.order == "aromatic" and not b.explicit and not ring_flags[k]:
            b.order = "single"

    degree = [0] * len(atoms)
    units = [0] * len(atoms)
    n_arom = [0] * len(atoms)
    in_ring = [False] * len(atoms)
    for k, b in enumerate(bonds):
        for a in (b.i, b.j):
            degree[a] += 1
            if b.order == "aromatic":
                n_arom[a] += 1
            else:
                units[a] += _VALENCE_UNITS[b.order]
            if ring_flags[k]:
                in_ring[a] = True

    records = []
    for a, atom in enumerate(atoms):
        if atom.bracket:
            h = atom.h_count or 0
        else:
            h = _implicit_h(atom, units[a], n_arom[a], text)
        records.append(AtomRecord(atom.element, atom.charge, h, atom.aromatic,
                                  degree[a], in_ring[a]))

    n_multiple = [0] * len(atoms)
    for b in bonds:
        if b.order != "single":
            n_multiple[b.i] += 1
            n_multiple[b.j] += 1
    bond_records = []
    for k, b in enumerate(bonds):
        if b.order == "aromatic":
            conj = True
        elif b.order != "single":
            conj = n_multiple[b.i] > 1 or n_multiple[b.j] > 1
        else:
            conj = n_multiple[b.i] > 0 and n_multiple[b.j] > 0
        bond_records.append(BondRecord(b.i, b.j, b.order, ring_flags[k], conj))
    return Molecule(tuple(records), tuple(bond_records), text)


def _implicit_h(atom: _Atom, units: int, n_arom: int, text: str) -> int:
    valences = DEFAULT_VALENCES[atom.element]
    if atom.aromatic:
        used = units + n_arom
        if used > valences[-1]:
            raise SmilesError("valence overflow", text, atom.pos)
        # one valence unit goes to the delocalised pi system
        return max(0, valences[0] - used - 1)
    for v in valences:
        if v >= units:
            return v - units
    raise SmilesError(f"valence overflow on {atom.element}", text, atom.pos)
