import itertools

import numpy as np
import pytest

from distqec.codes import build_honeycomb, build_toric, make_schedule
from distqec.partition import (ConnectivityGraph, build_connectivity_graph,
                               make_layout, select_largest_node,
                               spectral_partition)


def cycle_graph(n):
    edges = {}
    for i in range(n):
        u, v = i, (i + 1) % n
        edges[(min(u, v), max(u, v))] = 1
    return ConnectivityGraph(n, edges)


def grid_graph(rows, cols):
    edges = {}
    def idx(r, c):
        return r * cols + c
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges[(idx(r, c), idx(r, c + 1))] = 1
            if r + 1 < rows:
                edges[(idx(r, c), idx(r + 1, c))] = 1
    return ConnectivityGraph(rows * cols, edges)


def cut_size(graph, part):
    return sum(w for (u, v), w in graph.edges.items()
               if part.cluster_of[u] != part.cluster_of[v])


def brute_min_bisection(graph):
    n = graph.n_vertices
    best = None
    for S in itertools.combinations(range(n), n // 2):
        S = set(S)
        cut = sum(w for (u, v), w in graph.edges.items() if (u in S) != (v in S))
        best = cut if best is None else min(best, cut)
    return best


def test_c8_bisection_contiguous_optimal():
    g = cycle_graph(8)
    part = spectral_partition(g, 4, seed=3)
    assert len(part.clusters) == 2
    assert all(len(c) == 4 for c in part.clusters)
    assert cut_size(g, part) == 2 == brute_min_bisection(g)
    # contiguity on the cycle
    for cl in part.clusters:
        s = set(cl)
        assert sum(1 for i in cl if (i + 1) % 8 in s) == 3


def test_single_cluster_when_small():
    g = cycle_graph(6)
    part = spectral_partition(g, 16, seed=0)
    assert len(part.clusters) == 1
    assert part.clusters[0] == list(range(6))


def test_determinism_same_seed():
    sched = make_schedule(build_toric(4))
    g = build_connectivity_graph(sched)
    a = spectral_partition(g, 16, seed=9)
    b = spectral_partition(g, 16, seed=9)
    assert a.clusters == b.clusters and a.cluster_of == b.cluster_of


def test_rejects_tiny_nq():
    with pytest.raises(ValueError):
        spectral_partition(cycle_graph(4), 1)


def test_disconnected_graph_by_component():
    edges = {(0, 1): 1, (2, 3): 1, (4, 5): 1}
    g = ConnectivityGraph(6, edges)
    part = spectral_partition(g, 2, seed=0)
    assert not part.validate(2)
    assert sorted(map(tuple, part.clusters)) == [(0, 1), (2, 3), (4, 5)]


@pytest.mark.parametrize("d,nq,lo,hi", [(6, 48, 4, 4), (8, 48, 6, 8)])
def test_toric_cluster_counts(d, nq, lo, hi):
    sched = make_schedule(build_toric(d))
    g = build_connectivity_graph(sched)
    part = spectral_partition(g, nq, seed=11)
    assert not part.validate(nq)
    assert lo <= len(part.clusters) <= hi


def test_cluster_size_bound_various():
    for code, nq in ((build_toric(4), 16), (build_toric(6), 48),
                     (build_honeycomb(4, 4), 16)):
        sched = make_schedule(code)
        g = build_connectivity_graph(sched)
        part = spectral_partition(g, nq, seed=5)
        assert not part.validate(nq)
        assert all(len(c) <= nq for c in part.clusters)


def test_cut_quality_within_2x_of_optimum_small():
    for g in (cycle_graph(8), cycle_graph(10), cycle_graph(12),
              grid_graph(3, 4), grid_graph(2, 6)):
        part = spectral_partition(g, g.n_vertices // 2, seed=1)
        if len(part.clusters) != 2:
            continue
        assert cut_size(g, part) <= 2 * brute_min_bisection(g)


def test_connectivity_graph_examples():
    sched = make_schedule(build_toric(2))
    g = build_connectivity_graph(sched)
    assert g.n_vertices == 16  # 8 data + 8 ancilla
    sched_h = make_schedule(build_honeycomb(2, 2))
    gh = build_connectivity_graph(sched_h)
    assert gh.n_vertices == 8 and len(gh.edges) == 12
    assert all(w == 1 for w in gh.edges.values())


def test_layout_consistency_and_mediation():
    sched = make_schedule(build_toric(4))
    g = build_connectivity_graph(sched)
    part = spectral_partition(g, 16, seed=7)
    lay = make_layout(part, sched, 16)
    assert lay.qpi_count == 4
    # data qubit conservation across clusters
    n_data = sum(1 for cl in part.clusters for q in cl if q < sched.n_data)
    assert n_data == sched.n_data
    for info in lay.nonlocal_checks.values():
        assert (info.mediation == "bell") == (len(info.clusters) == 2)
        assert info.root in info.clusters
        assert info.n_bells == len(info.clusters) - 1
    # all-local partition has no nonlocal checks
    one = spectral_partition(g, 200, seed=0)
    assert not make_layout(one, sched, 200).nonlocal_checks


def test_select_largest_node_tie_break():
    from distqec.partition import Partition
    sched = make_schedule(build_toric(2))  # 8 data qubits: ids 0..7
    part = Partition({**{q: 0 for q in [0, 1, 2, 8, 9]},
                      **{q: 1 for q in [3, 4, 5, 10]},
                      **{q: 2 for q in [6, 7, 11, 12, 13, 14, 15]}},
                     [[0, 1, 2, 8, 9], [3, 4, 5, 10], [6, 7, 11, 12, 13, 14, 15]])
    # data counts: 3, 3, 2 -> tie between 0 and 1 -> lowest id
    assert select_largest_node(part, sched) == 0
