"""Reference grid Dijkstra, used when the compiled kernel is unavailable."""
from __future__ import annotations

import heapq
import math

import numpy as np


def grid_dijkstra(node_valid, edge_valid, offsets, weights, src: int, dst: int) -> float:
    """Shortest path length from ``src`` to ``dst`` on an implicit grid graph.

    ``edge_valid[i, m]`` says whether move ``m`` (flat index offset
    ``offsets[m]``, length ``weights[m]``) is allowed from node ``i``.  The
    heap is keyed on ``(distance, node)`` so ties resolve by node index.
    """
    node_valid = np.asarray(node_valid, dtype=np.uint8)
    edge_valid = np.asarray(edge_valid, dtype=np.uint8)
    offs = [int(o) for o in offsets]
    w = [float(x) for x in weights]
    if not (node_valid[src] and node_valid[dst]):
        return math.inf
    dist = {src: 0.0}
    done = set()
    heap = [(0.0, src)]
    M = len(offs)
    while heap:
        d, i = heapq.heappop(heap)
        if i in done:
            continue
        if i == dst:
            return d
        done.add(i)
        row = edge_valid[i]
        for m in range(M):
            if not row[m]:
                continue
            j = i + offs[m]
            nd = d + w[m]
            if nd < dist.get(j, math.inf):
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return math.inf
