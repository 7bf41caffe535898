"""SMILES parsing, featurization, directed graphs and scaffolds."""

from .features import Block, FeatureScheme, featurize
from .graph import (DirectedGraph, build_directed_graph, edge_neighborhood, graph_from_edges,
                    merge_graphs)
from .scaffold import EMPTY_SCAFFOLD, murcko_scaffold
from .smiles import AtomRecord, BondRecord, Molecule, SmilesError, parse_smiles

__all__ = [
    "AtomRecord", "BondRecord", "Block", "DirectedGraph", "EMPTY_SCAFFOLD", "FeatureScheme",
    "Molecule", "SmilesError", "build_directed_graph", "edge_neighborhood", "featurize",
    "graph_from_edges", "merge_graphs", "murcko_scaffold", "parse_smiles",
]
