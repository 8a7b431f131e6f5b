# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid Dijkstra; same algorithm and tie-breaking as the pure-Python kernel."""
from libc.math cimport INFINITY
from libcpp.queue cimport priority_queue
from libcpp.pair cimport pair
from libcpp.vector cimport vector

import numpy as np
cimport numpy as cnp

ctypedef pair[double, long long] entry


def grid_dijkstra(node_valid, edge_valid, offsets, weights, long long src, long long dst):
    cdef const unsigned char[::1] nv = np.ascontiguousarray(node_valid, dtype=np.uint8)
    cdef const unsigned char[:, ::1] ev = np.ascontiguousarray(edge_valid, dtype=np.uint8)
    cdef const long long[::1] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long long N = nv.shape[0]
    cdef int M = offs.shape[0]
    cdef vector[double] dist
    cdef vector[unsigned char] done
    cdef priority_queue[entry] heap  # max-heap on negated (dist, node)
    cdef entry top
    cdef double d, nd
    cdef long long i, j
    cdef int m
    if not (nv[src] and nv[dst]):
        return INFINITY
    dist.assign(N, INFINITY)
    done.assign(N, 0)
    cdef double result = INFINITY
    dist[src] = 0.0
    heap.push(entry(-0.0, -src))
    with nogil:
        while not heap.empty():
            top = heap.top()
            heap.pop()
            d = -top.first
            i = -top.second
            if done[i]:
                continue
            if i == dst:
                result = d
                break
            done[i] = 1
            for m in range(M):
                if not ev[i, m]:
                    continue
                j = i + offs[m]
                nd = d + w[m]
                if nd < dist[j]:
                    dist[j] = nd
                    heap.push(entry(-nd, -j))
    return result
