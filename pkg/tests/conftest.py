import csv
import json
from pathlib import Path

import numpy as np
import pytest

from dgat.molgraph import FeatureScheme, graph_from_edges

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"


@pytest.fixture(scope="session")
def scheme():
    return FeatureScheme.default()


@pytest.fixture(scope="session")
def golden():
    return [json.loads(line) for line in (CORPUS / "smiles_golden.jsonl").read_text().splitlines()]


@pytest.fixture(scope="session")
def scaffold_corpus():
    with open(CORPUS / "scaffold_corpus.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def random_categories(rng, blocks, n):
    return np.stack([rng.integers(0, b.n_valid, size=n) for b in blocks], axis=1).reshape(n, len(blocks))


def random_tree(rng, scheme, n_atoms):
    bonds = [(int(rng.integers(0, k)), k) for k in range(1, n_atoms)]
    return graph_from_edges(n_atoms, bonds, random_categories(rng, scheme.atom_blocks, n_atoms),
                            random_categories(rng, scheme.bond_blocks, len(bonds)), scheme)


def path_graph(scheme, atom_cats, bond_cats, n_atoms):
    return graph_from_edges(n_atoms, [(k, k + 1) for k in range(n_atoms - 1)], atom_cats[:n_atoms],
                            bond_cats[:n_atoms - 1], scheme)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is not None and acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.summary_lines():
            terminalreporter.write_line(line)
