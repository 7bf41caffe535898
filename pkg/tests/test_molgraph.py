import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_tree
from dgat.molgraph import (EMPTY_SCAFFOLD, Block, FeatureScheme, SmilesError, build_directed_graph,
                           edge_neighborhood, featurize, merge_graphs, murcko_scaffold, parse_smiles)


def test_isobutane():
    mol = parse_smiles("CC(C)C")
    assert mol.n_atoms == 4 and mol.n_bonds == 3
    assert all(a.element == "C" for a in mol.atoms)
    assert all(b.order == "single" for b in mol.bonds)
    assert mol.atoms[1].degree == 3


def test_methane_hydrogens():
    mol = parse_smiles("C")
    assert (mol.n_atoms, mol.n_bonds, mol.atoms[0].h_count) == (1, 0, 4)


def test_benzene():
    mol = parse_smiles("c1ccccc1")
    assert mol.n_atoms == 6 and mol.n_bonds == 6
    assert all(a.aromatic and a.in_ring and a.h_count == 1 for a in mol.atoms)
    assert all(b.order == "aromatic" and b.in_ring for b in mol.bonds)


@pytest.mark.parametrize("smiles,h", [
    ("[NH4+]", [4]), ("[O-]C=O", [0, 1, 0]), ("C#N", [1, 0]), ("c1cc[nH]c1", [1, 1, 1, 1, 1]),
    ("CS(=O)(=O)C", [3, 0, 0, 0, 3]), ("[Fe]", [0]), ("Cl", [1]), ("C=C", [2, 2]),
])
def test_implicit_hydrogens(smiles, h):
    assert [a.h_count for a in parse_smiles(smiles).atoms] == h


def test_bracket_atom_fields():
    a = parse_smiles("[13CH2-:3]").atoms[0]
    assert (a.element, a.charge, a.h_count) == ("C", -1, 2)


def test_ring_closure_percent_and_dot():
    mol = parse_smiles("C%12CC%12.O")
    assert mol.n_atoms == 4 and mol.n_bonds == 3
    assert [a.in_ring for a in mol.atoms] == [True, True, True, False]


def test_stereo_tokens_warn_and_are_ignored():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mol = parse_smiles("F/C=C/F")
        chiral = parse_smiles("N[C@@H](C)C(=O)O")
    assert caught
    assert mol.n_bonds == 3 and chiral.atoms[1].h_count == 1


@pytest.mark.parametrize("text,offset", [
    ("CC(C", 2), ("CC)C", 2), ("C1CC", 1), ("CXC", 1), ("CC(=O)(=O)(=O)C", 1), ("", 0),
    ("C[Zz]", 2), ("CC(=O)O)", 7), ("C:C", 1),
])
def test_parse_errors_report_byte_offsets(text, offset):
    with pytest.raises(SmilesError) as exc:
        parse_smiles(text)
    assert exc.value.offset == offset


def test_error_offset_counts_bytes():
    with pytest.raises(SmilesError) as exc:
        parse_smiles("CC(é")
    assert exc.value.offset == 3


def test_duplicate_and_self_bonds_rejected():
    with pytest.raises(SmilesError):
        parse_smiles("C11")
    with pytest.raises(SmilesError):
        parse_smiles("C12CC12")


def test_golden_corpus_bit_exact(golden, scheme):
    assert len(golden) == 50
    for rec in golden:
        mol = parse_smiles(rec["smiles"])
        assert mol.n_atoms == rec["n_atoms"], rec["smiles"]
        assert mol.n_bonds == rec["n_bonds"], rec["smiles"]
        assert [a.degree for a in mol.atoms] == rec["degrees"], rec["smiles"]
        assert [a.h_count for a in mol.atoms] == rec["h_counts"], rec["smiles"]
        assert [a.aromatic for a in mol.atoms] == rec["aromatic"], rec["smiles"]
        expected = (murcko_scaffold(parse_smiles(rec["scaffold_smiles"])) if rec["scaffold_smiles"]
                    else EMPTY_SCAFFOLD)
        assert murcko_scaffold(mol) == expected, rec["smiles"]
        g = build_directed_graph(mol, scheme)
        assert g.n_directed_edges == 2 * mol.n_bonds


# features -------------------------------------------------------------------

def test_default_scheme_dimensions(scheme):
    assert scheme.atom_dim == 42 and scheme.bond_dim == 11
    assert FeatureScheme.from_dict(json.loads(scheme.to_json())).hash == scheme.hash


def test_methane_carbon_one_hot(scheme):
    atom, bond = featurize(parse_smiles("C"), scheme)
    offset, size = scheme.atom_layout[0]
    assert atom[0, offset:offset + size].tolist() == [1.0] + [0.0] * (size - 1)
    assert bond.shape == (0, scheme.bond_dim)


def test_every_block_is_one_hot(golden, scheme):
    for rec in golden[:20]:
        atom, bond = featurize(parse_smiles(rec["smiles"]), scheme)
        assert (atom.sum(axis=1) == len(scheme.atom_blocks)).all()
        assert (bond.sum(axis=1) == len(scheme.bond_blocks)).all()
        for o, s in scheme.atom_layout:
            assert (atom[:, o:o + s].sum(axis=1) == 1).all()
            assert not atom[:, o + s - 1].any()  # MASK slot unused


def test_benzene_bond_features(scheme):
    _, bond = featurize(parse_smiles("c1ccccc1"), scheme)
    order = scheme.bond_blocks[0]
    ring = scheme.bond_blocks[1]
    (oo, _), (ro, _) = scheme.bond_layout[:2]
    assert (bond[:, oo + order.index("aromatic")] == 1).all()
    assert (bond[:, ro + ring.index(True)] == 1).all()


def test_unknown_element_maps_to_other(scheme):
    atom, _ = featurize(parse_smiles("[Fe]"), scheme)
    o, _ = scheme.atom_layout[0]
    assert atom[0, o + scheme.atom_blocks[0].other_index] == 1


def test_block_index_is_type_strict():
    b = Block("x", (0, 1), other=True)
    assert b.index(True) == b.other_index
    assert b.index(1) == 1


def test_scheme_save_load(tmp_path, scheme):
    scheme.save(tmp_path / "s.json")
    assert FeatureScheme.load(tmp_path / "s.json") == scheme


# directed graph ---------------------------------------------------------------

def test_ethane_directed_edges(scheme):
    g = build_directed_graph(parse_smiles("CC"), scheme)
    assert g.n_directed_edges == 2
    assert g.reverse_of.tolist() == [1, 0]
    assert edge_neighborhood(g, 0) == [0]


def test_benzene_incoming(scheme):
    g = build_directed_graph(parse_smiles("c1ccccc1"), scheme)
    assert g.n_directed_edges == 12
    assert all(len(x) == 2 for x in g.incoming)


def test_propane_neighbourhood(scheme):
    g = build_directed_graph(parse_smiles("CCC"), scheme)
    edge = {(int(s), int(d)): e for e, (s, d) in enumerate(zip(g.edge_src, g.edge_dst))}
    assert edge_neighborhood(g, edge[(1, 2)]) == [edge[(1, 2)], edge[(0, 1)]]


@pytest.mark.parametrize("seed", range(5))
def test_random_tree_incoming_matches_brute_force(scheme, seed):
    g = random_tree(np.random.default_rng(seed), scheme, 30)
    for i in range(g.n_atoms):
        brute = [e for e in range(g.n_directed_edges) if g.edge_dst[e] == i]
        assert g.incoming[i].tolist() == brute


def test_directed_graph_invariants(golden, scheme):
    for rec in golden:
        mol = parse_smiles(rec["smiles"])
        g = build_directed_graph(mol, scheme)
        e = np.arange(g.n_directed_edges)
        assert (g.reverse_of[g.reverse_of] == e).all()
        assert (g.reverse_of != e).all()
        assert (g.edge_src == g.edge_dst[g.reverse_of]).all()
        assert [len(x) for x in g.incoming] == [a.degree for a in mol.atoms]
        for k in range(g.n_directed_edges):
            nb = edge_neighborhood(g, k)
            assert nb[0] == k and g.reverse_of[k] not in nb
        assert np.array_equal(g.bond_feat[0::2], g.bond_feat[1::2])


def test_merge_keeps_molecule_membership(scheme):
    a = build_directed_graph(parse_smiles("CCO"), scheme)
    b = build_directed_graph(parse_smiles("c1ccccc1"), scheme)
    m = merge_graphs([a, b])
    assert m.n_mols == 2 and m.n_atoms == 9 and m.n_directed_edges == 16
    assert m.atom_mol.tolist() == [0] * 3 + [1] * 6
    assert (m.reverse_of[m.reverse_of] == np.arange(16)).all()
    idx, counts = m.mol_keys
    assert counts.tolist() == [4, 7]


def test_permute_atoms_preserves_structure(scheme):
    g = build_directed_graph(parse_smiles("CC(=O)N"), scheme)
    perm = [3, 1, 0, 2]
    p = g.permute_atoms(perm)
    assert np.array_equal(p.atom_cats, g.atom_cats[perm])
    for e in range(g.n_directed_edges):
        assert perm[p.edge_src[e]] == g.edge_src[e] and perm[p.edge_dst[e]] == g.edge_dst[e]


# scaffolds --------------------------------------------------------------------

def test_acyclic_scaffold_is_empty():
    assert murcko_scaffold(parse_smiles("CCCCCC")) == EMPTY_SCAFFOLD


def test_benzene_scaffold_stable():
    assert murcko_scaffold(parse_smiles("c1ccccc1")) == murcko_scaffold(parse_smiles("c1ccccc1"))
    assert murcko_scaffold(parse_smiles("c1ccccc1")) != EMPTY_SCAFFOLD


def test_toluene_shares_benzene_scaffold():
    assert murcko_scaffold(parse_smiles("Cc1ccccc1")) == murcko_scaffold(parse_smiles("c1ccccc1"))


def test_linker_is_kept():
    diphenylmethane = murcko_scaffold(parse_smiles("c1ccccc1Cc1ccccc1"))
    biphenyl = murcko_scaffold(parse_smiles("c1ccccc1-c1ccccc1"))
    assert diphenylmethane != biphenyl


@pytest.mark.parametrize("a,b", [
    ("Cc1ccccc1O", "Oc1ccccc1C"),
    ("CC(=O)Oc1ccccc1C(=O)O", "OC(=O)c1ccccc1OC(C)=O"),
    ("c1ccc2ccccc2c1", "c1cc2ccccc2cc1"),
    ("C1CCC(CC1)c1ccncc1", "c1cc(ccn1)C1CCCCC1"),
    ("CN1C=NC2=C1C(=O)N(C(=O)N2C)C", "O=C1N(C)C(=O)C2=C(N=CN2C)N1C"),
    ("O=C1CCCN1", "C1CC(=O)NC1"),
])
def test_scaffold_invariant_under_respelling(a, b):
    assert murcko_scaffold(parse_smiles(a)) == murcko_scaffold(parse_smiles(b))


def test_scaffold_corpus_agrees_with_reference_grouping(scaffold_corpus):
    keys = [murcko_scaffold(parse_smiles(r["smiles"])) for r in scaffold_corpus]
    ref = [r["rdkit_scaffold"] for r in scaffold_corpus]
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            assert (keys[i] == keys[j]) == (ref[i] == ref[j]), (scaffold_corpus[i], scaffold_corpus[j])


_ATOMS = st.sampled_from(["C", "N", "O", "c1ccccc1", "Cl", "C(=O)", "S"])


@settings(max_examples=60, deadline=None)
@given(st.lists(_ATOMS, min_size=1, max_size=6))
def test_generated_chains_parse_consistently(parts):
    smiles = "".join(parts)
    try:
        mol = parse_smiles(smiles)
    except SmilesError:
        return
    assert sum(a.degree for a in mol.atoms) == 2 * mol.n_bonds
    assert all(b.i < b.j for b in mol.bonds)
