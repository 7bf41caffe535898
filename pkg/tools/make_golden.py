"""Regenerate corpus/smiles_golden.jsonl from RDKit (dev-only; RDKit is not a runtime dep).

Every recorded value comes from RDKit, never from dgat, so the corpus is an
independent oracle for the parser. Scaffolds use RDKit's Murcko framework with
the remaining exocyclic terminal atoms stripped (classic ring-systems + linkers).
"""

import json
import sys
from pathlib import Path

from rdkit import Chem
from rdkit.Chem.Scaffolds import MurckoScaffold

SOURCE = [
    "CC(C)C", "C", "c1ccccc1", "Cc1ccccc1", "CCO", "CC(=O)O", "CC(=O)Nc1ccc(O)cc1",
    "CC(=O)Oc1ccccc1C(=O)O", "CN1CCC[C@H]1c1cccnc1", "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "c1ccc2ccccc2c1", "c1ccc2c(c1)ccc1ccccc12", "c1ccncc1", "c1cc[nH]c1", "c1ccoc1",
    "c1ccsc1", "c1ccc2[nH]ccc2c1", "O=C1CCCCC1", "C1CCCCC1", "C1CC1", "C1CCOC1",
    "N#Cc1ccccc1", "CC#N", "C=CC=C", "ClC(Cl)Cl", "FC(F)(F)c1ccccc1", "Brc1ccccc1I",
    "CS(=O)(=O)N", "OP(=O)(O)O", "NC(=O)N", "CC(C)Cc1ccc(C(C)C(=O)O)cc1",
    "COc1ccc2[nH]cc(CCN)c2c1", "c1ccc(-c2ccccc2)cc1", "c1ccc(Cc2ccccc2)cc1",
    "O=C(O)c1ccccc1O", "CC(C)NCC(O)COc1cccc2ccccc12", "C[N+](C)(C)C", "CC(=O)[O-]",
    "[Na+].[Cl-]", "OCC1OC(O)C(O)C(O)C1O", "c1ccc2c(c1)[nH]c1ccccc12",
    "O=c1cc[nH]c(=O)[nH]1", "Nc1ncnc2[nH]cnc12", "CCN(CC)CC", "CCCCCC",
    "C1CCC2(CC1)CCCC2", "C1CC2CCC1C2", "c1ccc(OCCOc2ccccc2)cc1", "CC1=CC(=O)CC(C)(C)C1",
    "O=[N+]([O-])c1ccccc1", "c1cnc2ncccc2c1", "B(O)(O)c1ccccc1", "CSCC[C@H](N)C(=O)O",
    "C1=CCC=CC1", "c1ccc(C2CCCCC2)cc1", "OC(=O)C=CC(=O)O",
]


def classic_scaffold(mol):
    scaf = MurckoScaffold.GetScaffoldForMol(mol)
    rw = Chem.RWMol(scaf)
    changed = True
    while changed:
        changed = False
        for atom in list(rw.GetAtoms()):
            if atom.GetDegree() <= 1 and not atom.IsInRing() and rw.GetNumAtoms() > 1:
                rw.RemoveAtom(atom.GetIdx())
                changed = True
                break
    out = rw.GetMol()
    # stripping exocyclic =O can leave an aromatic ring RDKit cannot kekulize
    out.UpdatePropertyCache(strict=False)
    Chem.FastFindRings(out)
    return Chem.MolToSmiles(out) if out.GetNumAtoms() and out.GetRingInfo().NumRings() else ""


def record(smiles):
    mol = Chem.MolFromSmiles(smiles)
    can = Chem.MolToSmiles(mol, isomericSmiles=False)
    mol = Chem.MolFromSmiles(can)
    has_ring = mol.GetRingInfo().NumRings() > 0
    return {
        "smiles": can,
        "n_atoms": mol.GetNumAtoms(),
        "n_bonds": mol.GetNumBonds(),
        "degrees": [a.GetDegree() for a in mol.GetAtoms()],
        "h_counts": [a.GetTotalNumHs() for a in mol.GetAtoms()],
        "aromatic": [a.GetIsAromatic() for a in mol.GetAtoms()],
        "scaffold_smiles": classic_scaffold(mol) if has_ring else "",
    }


def main(out="corpus/smiles_golden.jsonl", limit=50):
    rows, seen = [], set()
    for s in SOURCE:
        rec = record(s)
        if rec["smiles"] in seen:
            continue
        seen.add(rec["smiles"])
        rows.append(rec)
        if len(rows) == limit:
            break
    Path(out).write_text("".join(json.dumps(r) + "\n" for r in rows))
    print(f"wrote {len(rows)} records to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
