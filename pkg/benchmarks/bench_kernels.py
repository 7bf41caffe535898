"""Compare the compiled and NumPy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--dim 32]

Times the ragged attention kernels and the row scatter-add in isolation, then a
full forward + backward pass of a model over a batch of molecules.
"""

import argparse
import timeit

import numpy as np

from dgat.model import DGAT, ModelConfig
from dgat.molgraph import parse_smiles
from dgat.tensor import Tape, backward, block_cross_entropy, kernels

BATCH = ["CC(=O)Oc1ccccc1C(=O)O", "CN1C=NC2=C1C(=O)N(C(=O)N2C)C", "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
         "OC(=O)c1ccccc1O", "CC(=O)Nc1ccc(O)cc1", "c1ccc2ccccc2c1", "CCOC(=O)C1CCN(C)CC1", "O=C1CCCCC1"] * 4


def best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(g, dim, heads, rng):
    idx, counts = g.bond_keys
    n = g.n_directed_edges
    q, k, v = (rng.normal(size=(n, dim)) for _ in range(3))
    scale = 1.0 / np.sqrt(dim // heads)
    out, alpha = kernels.attention_forward(q, k, v, idx, counts, heads, scale)
    grad = rng.normal(size=out.shape)
    src = rng.normal(size=(n, dim))
    rows = g.edge_dst.astype(np.int64)
    return {
        "attention forward": lambda: kernels.attention_forward(q, k, v, idx, counts, heads, scale),
        "attention backward": lambda: kernels.attention_backward(grad, q, k, v, idx, counts, heads, scale, alpha),
        "scatter_add_rows": lambda: kernels.scatter_add_rows(src, rows, g.n_atoms),
    }


def train_step(model, g):
    def run():
        with Tape() as tape:
            res = model.forward(g, "train", np.random.default_rng(0))
            loss = block_cross_entropy(model.atom_logits(res), g.atom_cats, g.scheme.atom_layout)
        backward(tape, loss)
    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--heads", type=int, default=4)
    args = ap.parse_args()

    model = DGAT(ModelConfig(d_model=args.dim, n_layers=3, n_heads=args.heads, dropout=0.1), seed=0)
    model.add_recovery_head(seed=1)
    g = model.graph([parse_smiles(s) for s in BATCH])
    print(f"batch: {g.n_mols} molecules, {g.n_atoms} atoms, {g.n_directed_edges} directed edges, "
          f"D_h={args.dim}, heads={args.heads}")
    backends = kernels.available()
    rows = {}
    for name in backends:
        with kernels.use_backend(name):
            cases = kernel_cases(g, args.dim, args.heads, np.random.default_rng(0))
            cases["model forward+backward"] = train_step(model, g)
            for label, fn in cases.items():
                number = 3 if label.startswith("model") else 50
                rows.setdefault(label, {})[name] = best(fn, args.repeat, number)

    header = f"{'case':<26}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, times in rows.items():
        line = f"{label:<26}" + "".join(f"{times[b] * 1e3:>11.3f} ms" for b in backends)
        if len(backends) == 2:
            line += f"{times['python'] / times['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
