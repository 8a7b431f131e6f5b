import math

import numpy as np
import pytest

from mobiuskit import _dijkstra_py, kernels


def _random_grid(rng, shape=(30, 40), hole=0.25):
    N = int(np.prod(shape))
    moves = np.array([m for m in np.ndindex(3, 3) if m != (1, 1)]) - 1
    strides = np.array([shape[1], 1])
    offsets = moves @ strides
    weights = np.sqrt(np.sum(moves ** 2, axis=1)).astype(float)
    node = (rng.uniform(size=N) > hole).astype(np.uint8)
    grid = np.stack(np.unravel_index(np.arange(N), shape), axis=-1)
    edge = np.zeros((N, len(moves)), dtype=np.uint8)
    for m, mv in enumerate(moves):
        tgt = grid + mv
        inside = np.all((tgt >= 0) & (tgt < shape), axis=1)
        j = np.where(inside, np.arange(N) + offsets[m], 0)
        edge[:, m] = inside & node.astype(bool) & node[j].astype(bool)
    return node, edge, offsets, weights, moves, shape


def test_python_kernel_matches_networkx(rng):
    nx = pytest.importorskip("networkx")
    node, edge, offsets, weights, moves, shape = _random_grid(rng)
    G = nx.DiGraph()
    for i in np.flatnonzero(node):
        for m in np.flatnonzero(edge[i]):
            G.add_edge(int(i), int(i + offsets[m]), weight=float(weights[m]))
    valid = np.flatnonzero(node)
    for _ in range(20):
        s, t = rng.choice(valid, 2, replace=False)
        got = _dijkstra_py.grid_dijkstra(node, edge, offsets, weights, int(s), int(t))
        try:
            ref = nx.dijkstra_path_length(G, int(s), int(t))
        except (nx.NetworkXNoPath, nx.NodeNotFound):
            ref = math.inf
        assert got == pytest.approx(ref, rel=1e-12) if math.isfinite(ref) else math.isinf(got)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")
def test_compiled_kernel_matches_reference_bit_for_bit(rng):
    node, edge, offsets, weights, *_ = _random_grid(rng)
    valid = np.flatnonzero(node)
    for _ in range(50):
        s, t = (int(v) for v in rng.choice(valid, 2, replace=False))
        assert kernels.grid_dijkstra(node, edge, offsets, weights, s, t) == \
            _dijkstra_py.grid_dijkstra(node, edge, offsets, weights, s, t)


def test_invalid_endpoints_are_unreachable(rng):
    node, edge, offsets, weights, *_ = _random_grid(rng)
    bad = int(np.flatnonzero(node == 0)[0])
    good = int(np.flatnonzero(node)[0])
    assert math.isinf(kernels.grid_dijkstra(node, edge, offsets, weights, bad, good))


def test_fallback_is_selected_by_environment():
    import os
    import subprocess
    import sys
    env = dict(os.environ, MOBIUSKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from mobiuskit.kernels import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
