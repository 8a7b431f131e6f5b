"""Compare the compiled and pure-Python grid Dijkstra kernels on a shared workload.

    python3 benchmarks/bench_kernels.py [--h 0.01] [--pairs 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mobiuskit import _dijkstra_py
from mobiuskit.normal_domains import GridPathEstimator, cone_graph, random_pairs

try:
    from mobiuskit import _kernels
except ImportError:  # extension not built
    _kernels = None


def run(kernel, est: GridPathEstimator, pairs) -> tuple[float, list[float]]:
    out = []
    t0 = time.perf_counter()
    for x, y in pairs:
        ix, _ = est.snap(np.asarray(x))
        iy, _ = est.snap(np.asarray(y))
        out.append(kernel(est.node_valid, est.edge_valid, est.offsets, est.weights, ix, iy))
    return time.perf_counter() - t0, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--pairs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    dom = cone_graph(1.0)
    est = GridPathEstimator(dom, args.h)
    pairs = random_pairs(dom, args.pairs, np.random.default_rng(args.seed), 0.05, min_separation=2.0)
    print(f"grid {est.shape}, {len(pairs)} pairs")
    t_py, d_py = run(_dijkstra_py.grid_dijkstra, est, pairs)
    print(f"python : {t_py:8.3f} s")
    if _kernels is None:
        print("cython : not built")
        return
    t_cy, d_cy = run(_kernels.grid_dijkstra, est, pairs)
    print(f"cython : {t_cy:8.3f} s   speedup x{t_py / t_cy:.1f}")
    print("results identical:", d_py == d_cy)


if __name__ == "__main__":
    main()
