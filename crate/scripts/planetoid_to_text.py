#!/usr/bin/env python3
"""Convert a Planetoid dataset (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into the three text files read by `dog`.

Standard split: the first 20 per class labeled nodes train, the next 500
validate, the listed 1000 test. Nodes outside the split are written unlabeled.
Self-loops and duplicate edges are dropped.

    python3 scripts/planetoid_to_text.py --raw planetoid/data --name cora --out data/cora
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw: Path, name: str, key: str):
    with open(raw / f"ind.{name}.{key}", "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(raw: Path, name: str, out: Path, n_val: int) -> None:
    x, y, tx, ty, allx, ally, graph = (load(raw, name, k) for k in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    test_range = np.sort(test_index)

    if name == "citeseer":
        # isolated test nodes are missing from tx/ty
        full = range(test_range.min(), test_range.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_range - test_range.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_range - test_range.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_range, :]
    onehot = np.vstack((ally, ty))
    onehot[test_index, :] = onehot[test_range, :]
    features = np.asarray(features.todense())
    n = features.shape[0]

    split = {}
    for i in range(len(y)):
        split[i] = "train"
    for i in range(len(y), len(y) + n_val):
        split[i] = "val"
    for i in test_range:
        split[int(i)] = "test"

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "features.txt", "w") as f:
        for row in features:
            f.write(" ".join(repr(float(v)) if v != int(v) else str(int(v)) for v in row) + "\n")
    with open(out / "edges.txt", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u} {v}\n")
    with open(out / "labels.txt", "w") as f:
        for i in range(n):
            tag = split.get(i)
            has_label = onehot[i].sum() > 0
            if tag is None or not has_label:
                f.write("- test\n")
            else:
                f.write(f"{int(onehot[i].argmax())} {tag}\n")
    counts = {t: sum(1 for s in split.values() if s == t) for t in ("train", "val", "test")}
    print(f"{name}: {n} nodes, {len(edges)} edges, {features.shape[1]} features, split {counts}", file=sys.stderr)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--raw", type=Path, required=True, help="directory holding the ind.<name>.* files")
    p.add_argument("--name", default="cora")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--val", type=int, default=500, help="validation nodes after the training block")
    a = p.parse_args()
    convert(a.raw, a.name, a.out, a.val)


if __name__ == "__main__":
    main()
