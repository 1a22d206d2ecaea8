"""Numba kernels for hot loops: tableau row arithmetic and defect-graph
shortest paths.  All kernels are deterministic and operate on plain numpy
arrays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# -- stabilizer tableau ------------------------------------------------------


@njit(cache=True)
def rowsum_batch(x, z, r, rows, pivot):
    """row[h] := row[pivot] * row[h] for every h in ``rows`` (h != pivot)."""
    n = x.shape[1]
    for idx in range(rows.shape[0]):
        h = rows[idx]
        g = 0
        for j in range(n):
            x1 = x[pivot, j]
            z1 = z[pivot, j]
            if not (x1 or z1):
                continue
            x2 = x[h, j]
            z2 = z[h, j]
            if x1 and z1:
                g += (1 if z2 else 0) - (1 if x2 else 0)
            elif x1:
                if z2:
                    g += 1 if x2 else -1
            else:
                if x2:
                    g += -1 if z2 else 1
        tot = (2 * r[h] + 2 * r[pivot] + g) % 4
        r[h] = tot // 2
        for j in range(n):
            x[h, j] ^= x[pivot, j]
            z[h, j] ^= z[pivot, j]


@njit(cache=True)
def product_phase(x, z, r, rows, sx, sz):
    """Accumulate the product of rows ``rows`` into the scratch Pauli
    (sx, sz); returns its sign bit.  Scratch must start all-False."""
    n = x.shape[1]
    sr = 0
    for idx in range(rows.shape[0]):
        i = rows[idx]
        g = 0
        for j in range(n):
            x1 = x[i, j]
            z1 = z[i, j]
            if not (x1 or z1):
                continue
            x2 = sx[j]
            z2 = sz[j]
            if x1 and z1:
                g += (1 if z2 else 0) - (1 if x2 else 0)
            elif x1:
                if z2:
                    g += 1 if x2 else -1
            else:
                if x2:
                    g += -1 if z2 else 1
        tot = (2 * sr + 2 * r[i] + g) % 4
        sr = tot // 2
        for j in range(n):
            sx[j] ^= x[i, j]
            sz[j] ^= z[i, j]
    return sr


# -- defect graph shortest paths ----------------------------------------------


@njit(cache=True)
def dijkstra_all(indptr, indices, weights, dist, pred):
    """All-pairs Dijkstra on a CSR graph, filling ``dist`` and ``pred``.

    Distance ties are broken toward the smaller predecessor index, which
    makes reconstructed paths deterministic.
    """
    n_nodes = dist.shape[0]
    heap_d = np.empty(16 * n_nodes + 16, dtype=np.float64)
    heap_n = np.empty(16 * n_nodes + 16, dtype=np.int64)
    done = np.zeros(n_nodes, dtype=np.uint8)
    for src in range(n_nodes):
        d = dist[src]
        p = pred[src]
        for i in range(n_nodes):
            d[i] = np.inf
            p[i] = -1
            done[i] = 0
        d[src] = 0.0
        heap_d[0] = 0.0
        heap_n[0] = src
        size = 1
        while size > 0:
            bd = heap_d[0]
            bn = heap_n[0]
            size -= 1
            heap_d[0] = heap_d[size]
            heap_n[0] = heap_n[size]
            i = 0
            while True:
                l = 2 * i + 1
                rr = 2 * i + 2
                m = i
                if l < size and (heap_d[l] < heap_d[m] or (heap_d[l] == heap_d[m] and heap_n[l] < heap_n[m])):
                    m = l
                if rr < size and (heap_d[rr] < heap_d[m] or (heap_d[rr] == heap_d[m] and heap_n[rr] < heap_n[m])):
                    m = rr
                if m == i:
                    break
                heap_d[i], heap_d[m] = heap_d[m], heap_d[i]
                heap_n[i], heap_n[m] = heap_n[m], heap_n[i]
                i = m
            if done[bn]:
                continue
            if bd > d[bn]:
                continue
            done[bn] = 1
            for e in range(indptr[bn], indptr[bn + 1]):
                v = indices[e]
                if done[v]:
                    continue
                nd = bd + weights[e]
                if nd < d[v] or (nd == d[v] and bn < p[v]):
                    d[v] = nd
                    p[v] = bn
                    if size >= heap_d.shape[0]:
                        new_d = np.empty(heap_d.shape[0] * 2, dtype=np.float64)
                        new_n = np.empty(heap_n.shape[0] * 2, dtype=np.int64)
                        for k in range(size):
                            new_d[k] = heap_d[k]
                            new_n[k] = heap_n[k]
                        heap_d = new_d
                        heap_n = new_n
                    heap_d[size] = nd
                    heap_n[size] = v
                    i = size
                    size += 1
                    while i > 0:
                        par = (i - 1) // 2
                        if heap_d[par] > heap_d[i] or (heap_d[par] == heap_d[i] and heap_n[par] > heap_n[i]):
                            heap_d[par], heap_d[i] = heap_d[i], heap_d[par]
                            heap_n[par], heap_n[i] = heap_n[i], heap_n[par]
                            i = par
                        else:
                            break


@njit(cache=True)
def walk_path_mask(pred_row, adj_indptr, adj_indices, adj_masks, u, v):
    """XOR of edge observable masks along the predecessor-tree path from
    source ``u`` (owner of ``pred_row``) to ``v``.  Returns the mask, or
    ~0 when the path is broken (caller treats that as an error)."""
    mask = np.uint64(0)
    cur = v
    steps = 0
    limit = pred_row.shape[0] + 1
    while cur != u:
        p = pred_row[cur]
        if p < 0 or steps > limit:
            return np.uint64(0xFFFFFFFFFFFFFFFF)
        found = False
        for e in range(adj_indptr[p], adj_indptr[p + 1]):
            if adj_indices[e] == cur:
                mask ^= adj_masks[e]
                found = True
                break
        if not found:
            return np.uint64(0xFFFFFFFFFFFFFFFF)
        cur = p
        steps += 1
    return mask
