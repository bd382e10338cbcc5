"""Compare the compiled and numpy intruder-counting kernels.

    python3 benchmarks/bench_kernels.py [--members 30] [--width 15000] [--repeat 20]

Part one times ``group_stats`` alone on one synthetic group block.  Part two
times a full robustness run over a random taxonomy with each kernel swapped
in, using a precomputed similarity matrix so the kernel dominates.
"""

import argparse
import random
import timeit

import numpy as np

from taxoqual import _core
from taxoqual.metrics import robustness
from taxoqual.model import build_forest
from taxoqual.similarity import SimilarityBackend


class MatrixBackend(SimilarityBackend):
    """Scores read from a dense symmetric matrix indexed by label."""

    name = "matrix"

    def __init__(self, labels, seed=0):
        rng = np.random.default_rng(seed)
        n = len(labels)
        m = rng.random((n, n))
        m = (m + m.T) / 2
        np.fill_diagonal(m, 1.0)
        self.m = m
        self.pos = {lab: i for i, lab in enumerate(labels)}

    def score(self, a, b):
        return float(self.m[self.pos[a], self.pos[b]])

    def block(self, rows, cols, cache=None):
        r = [self.pos[a] for a in rows]
        c = [self.pos[b] for b in cols]
        return self.m[np.ix_(r, c)]


def synthetic_taxonomy(n_groups, group_size, seed=0):
    rng = random.Random(seed)
    edges = [("D", "D", None, "root")]
    labels = []
    for g in range(n_groups):
        edges.append(("D", f"g{g}", "D", f"group {g}"))
        for i in range(rng.randint(2, 2 * group_size)):
            lab = f"leaf {g}.{i}"
            edges.append(("D", f"g{g}.{i}", f"g{g}", lab))
            labels.append(lab)
    return build_forest(edges, name="bench"), labels


def bench_kernel(members, width, repeat):
    rng = np.random.default_rng(1)
    rows = rng.random((members, width))
    cols = rng.choice(width, size=members, replace=False)
    print(f"group_stats on a {members} x {width} block ({repeat} runs, best of 3)")
    results = {}
    for name, fn in sorted(_core.available().items()):
        t = min(timeit.repeat(lambda: fn(rows, cols), number=repeat, repeat=3)) / repeat
        results[name] = fn(rows, cols)
        print(f"  {name:<8} {t * 1e3:9.3f} ms")
    if len(set(results.values())) != 1:
        raise SystemExit(f"implementations disagree: {results}")


def bench_robustness(n_groups, group_size):
    tax, labels = synthetic_taxonomy(n_groups, group_size)
    backend = MatrixBackend(labels)
    print(f"full robustness run: {n_groups} groups, {len(labels)} characteristics")
    saved = _core.group_stats
    reports = {}
    try:
        for name, fn in sorted(_core.available().items()):
            _core.group_stats = fn
            t = min(timeit.repeat(lambda: robustness(tax, backend), number=1, repeat=3))
            reports[name] = robustness(tax, backend).r
            print(f"  {name:<8} {t:9.3f} s   R = {reports[name]:.6f}")
    finally:
        _core.group_stats = saved
    if len(set(reports.values())) != 1:
        raise SystemExit(f"implementations disagree: {reports}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--members", type=int, default=30)
    ap.add_argument("--width", type=int, default=15000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--groups", type=int, default=600)
    ap.add_argument("--group-size", type=int, default=6)
    args = ap.parse_args()
    print(f"default kernel: {_core.IMPLEMENTATION}")
    bench_kernel(args.members, args.width, args.repeat)
    bench_robustness(args.groups, args.group_size)


if __name__ == "__main__":
    main()
