"""Regenerate corpus/scaffold_corpus.csv (dev-only, needs RDKit).

Decorates ring cores with substituents so scaffold groups have uneven sizes.
The RDKit framework (see make_golden.classic_scaffold) is stored alongside
for cross-checking dgat's scaffold keys.
"""

import csv
import sys
from pathlib import Path

from rdkit import Chem

sys.path.insert(0, str(Path(__file__).parent))
from make_golden import classic_scaffold  # noqa: E402

CORES = [
    "c1ccc({R})cc1", "c1ccncc1{R}", "C1CCC({R})CC1", "c1ccc2cc({R})ccc2c1",
    "c1ccc2[nH]cc({R})c2c1", "c1csc({R})c1", "c1coc({R})c1", "C1CCN({R})CC1",
    "C1COCCN1{R}", "c1ccc(-c2ccc({R})cc2)cc1", "c1ccc(Cc2ccc({R})cc2)cc1", "C1CCC({R})C1",
    "c1cnc({R})nc1", "c1c({R})[nH]cn1", "c1ccc2ncc({R})cc2c1", "C1CC({R})OC1", "C1CC1{R}",
    "c1cc({R})[nH]c1", "c1ccc2[nH]c({R})nc2c1", "O=C1CCC({R})CC1",
]
SUBSTITUENTS = ["C", "O", "N", "Cl", "C(=O)O", "CC", "OC", "F", "C#N", "CCO"]
ACYCLIC = ["CCCC", "CCOCC", "CCN", "CC(C)O", "CCCCO"]


def main(out="corpus/scaffold_corpus.csv", target=100):
    rows, seen = [], set()
    for k, core in enumerate(CORES):
        for sub in SUBSTITUENTS[: 2 + (k * 3) % 8]:
            mol = Chem.MolFromSmiles(core.format(R=sub))
            smi = Chem.MolToSmiles(mol, isomericSmiles=False)
            if smi not in seen:
                seen.add(smi)
                rows.append((smi, classic_scaffold(Chem.MolFromSmiles(smi))))
    rows = rows[: target - len(ACYCLIC)]
    for smi in ACYCLIC:
        rows.append((Chem.MolToSmiles(Chem.MolFromSmiles(smi)), ""))
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["smiles", "rdkit_scaffold"])
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
