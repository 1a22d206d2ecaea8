"""Qubit-to-QPU assignment.

The interaction graph of a schedule is cut into clusters of at most n_q
qubits by recursive spectral bisection (Fiedler vector of the unnormalized
Laplacian, median split).  The resulting layout records, per check, which
clusters participate and what entanglement mediates it: nothing (local), a
Bell pair (two clusters), or an N-qubit GHZ state (N clusters, assembled
from N-1 Bell pairs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codes import ScheduleTemplate

__all__ = [
    "ConnectivityGraph",
    "Partition",
    "NetworkLayout",
    "NonlocalCheck",
    "build_connectivity_graph",
    "spectral_partition",
    "make_layout",
    "select_largest_node",
]


@dataclass
class ConnectivityGraph:
    n_vertices: int
    edges: dict  # (u, v) with u < v -> weight (interactions per period)

    def weight_matrix(self, vertices) -> np.ndarray:
        idx = {v: i for i, v in enumerate(vertices)}
        w = np.zeros((len(vertices), len(vertices)))
        for (u, v), wt in self.edges.items():
            if u in idx and v in idx:
                w[idx[u], idx[v]] = wt
                w[idx[v], idx[u]] = wt
        return w


@dataclass
class Partition:
    cluster_of: dict          # vertex -> cluster id
    clusters: list            # list of sorted vertex lists

    def validate(self, n_q: int) -> list[str]:
        v = []
        seen = set()
        for ci, cl in enumerate(self.clusters):
            if len(cl) > n_q:
                v.append(f"cluster {ci} exceeds n_q: {len(cl)} > {n_q}")
            for q in cl:
                if q in seen:
                    v.append(f"vertex {q} in two clusters")
                seen.add(q)
                if self.cluster_of.get(q) != ci:
                    v.append(f"cluster_of[{q}] inconsistent")
        return v


@dataclass
class NonlocalCheck:
    check_id: int
    clusters: tuple           # participating cluster ids, sorted
    mediation: str            # 'bell' or 'ghz'
    root: int = -1            # fusion-star root cluster

    @property
    def n_bells(self) -> int:
        return len(self.clusters) - 1


@dataclass
class NetworkLayout:
    partition: Partition
    n_q: int
    qpi_count: int
    nonlocal_checks: dict              # check_id -> NonlocalCheck
    bell_demand: dict                  # (sub_round, cluster) -> Bell halves
    comm_qubits: dict = field(default_factory=dict)  # cluster -> [qubit ids]

    @property
    def n_clusters(self) -> int:
        return len(self.partition.clusters)


def build_connectivity_graph(schedule: ScheduleTemplate) -> ConnectivityGraph:
    """One vertex per data/ancilla qubit, one weighted edge per interacting
    pair over a schedule period."""
    edges: dict = {}

    def bump(u, v):
        if u == v:
            return
        key = (min(u, v), max(u, v))
        edges[key] = edges.get(key, 0) + 1

    for t in range(schedule.period):
        for cid in schedule.sub_rounds[t]:
            ch = schedule.checks[cid]
            qs = [q for q, _ in ch.terms]
            if ch.ancilla is not None:
                for q in qs:
                    bump(q, ch.ancilla)
            else:
                for i in range(len(qs)):
                    for j in range(i + 1, len(qs)):
                        bump(qs[i], qs[j])
    return ConnectivityGraph(schedule.n_qubits, edges)


def _fiedler_vector(w: np.ndarray, seed: int) -> np.ndarray:
    """Second eigenvector of L = D - W by deflated power iteration on the
    shifted operator sigma*I - L.  Deterministic for a fixed seed."""
    n = w.shape[0]
    deg = w.sum(axis=1)
    sigma = 2.0 * float(deg.max()) + 1.0
    rng = np.random.Generator(np.random.Philox(key=seed))
    v = rng.normal(size=n)
    ones = np.ones(n) / math.sqrt(n)
    v -= (v @ ones) * ones
    nv = np.linalg.norm(v)
    if nv == 0:
        v = np.arange(n) - (n - 1) / 2.0
        v /= np.linalg.norm(v)
    else:
        v /= nv
    tol = 1e-8
    for _ in range(100_000):
        # (sigma I - L) v = sigma v - deg*v + W v
        nxt = sigma * v - deg * v + w @ v
        nxt -= (nxt @ ones) * ones
        norm = np.linalg.norm(nxt)
        if norm == 0:
            return v
        nxt /= norm
        if np.linalg.norm(nxt - v) < tol or np.linalg.norm(nxt + v) < tol:
            v = nxt
            break
        v = nxt
    return v


def spectral_partition(graph: ConnectivityGraph, n_q: int,
                       seed: int = 0) -> Partition:
    """Recursive median-split bisection until every cluster has <= n_q
    vertices.  Disconnected graphs are split per component first."""
    if n_q < 2:
        raise ValueError("n_q must be >= 2")
    clusters: list = []

    def components(vertices) -> list:
        vs = set(vertices)
        adj: dict = {v: [] for v in vertices}
        for (u, v) in graph.edges:
            if u in vs and v in vs:
                adj[u].append(v)
                adj[v].append(u)
        seen = set()
        comps = []
        for v0 in sorted(vs):
            if v0 in seen:
                continue
            comp = []
            stack = [v0]
            seen.add(v0)
            while stack:
                u = stack.pop()
                comp.append(u)
                for nb in adj[u]:
                    if nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            comps.append(sorted(comp))
        return comps

    def bisect(vertices, depth):
        if len(vertices) <= n_q:
            clusters.append(sorted(vertices))
            return
        comps = components(vertices)
        if len(comps) > 1:
            for comp in comps:
                bisect(comp, depth + 1)
            return
        vs = sorted(vertices)
        w = graph.weight_matrix(vs)
        f = _fiedler_vector(w, seed + depth)
        order = sorted(range(len(vs)), key=lambda i: (f[i], vs[i]))
        half = len(vs) // 2
        left = [vs[i] for i in order[:half]]
        right = [vs[i] for i in order[half:]]
        bisect(left, 2 * depth + 1)
        bisect(right, 2 * depth + 2)

    bisect(list(range(graph.n_vertices)), 1)
    clusters.sort()
    cluster_of = {}
    for ci, cl in enumerate(clusters):
        for q in cl:
            cluster_of[q] = ci
    return Partition(cluster_of, clusters)


def make_layout(partition: Partition, schedule: ScheduleTemplate,
                n_q: int) -> NetworkLayout:
    """Classify every check as local / Bell / GHZ and tally the Bell-pair
    demand each cluster faces per sub-round.  GHZ_N assembly consumes N-1
    Bell pairs; a weight-2 check between two clusters consumes one."""
    qpi = math.ceil(math.sqrt(n_q))
    nonlocal_checks: dict = {}
    bell_demand: dict = {}
    load: dict = {}  # (sub_round, cluster) -> assigned Bell halves
    for t in range(schedule.period):
        for cid in schedule.sub_rounds[t]:
            ch = schedule.checks[cid]
            qs = [q for q, _ in ch.terms]
            if ch.ancilla is not None:
                qs.append(ch.ancilla)
            cls = tuple(sorted({partition.cluster_of[q] for q in qs}))
            if len(cls) == 1:
                continue
            mediation = "bell" if len(cls) == 2 else "ghz"
            # root = cluster with the most data qubits of the check; ties
            # break toward the currently least-loaded cluster so the star
            # roots (which hold one half per leaf) spread evenly
            counts = {c: 0 for c in cls}
            for q, _ in ch.terms:
                counts[partition.cluster_of[q]] += 1
            root = max(cls, key=lambda c: (counts[c], -load.get((t, c), 0), -c))
            nonlocal_checks[cid] = NonlocalCheck(cid, cls, mediation, root)
            for leaf in cls:
                if leaf == root:
                    continue
                for key in ((t, root), (t, leaf)):
                    bell_demand[key] = bell_demand.get(key, 0) + 1
                    load[key] = load.get(key, 0) + 1
    comm = {}
    base = schedule.n_qubits
    for ci in range(len(partition.clusters)):
        comm[ci] = list(range(base + ci * qpi, base + (ci + 1) * qpi))
    return NetworkLayout(partition, n_q, qpi, nonlocal_checks, bell_demand,
                         comm_qubits=comm)


def select_largest_node(partition: Partition,
                        schedule: ScheduleTemplate) -> int:
    """Cluster with the most data qubits; ties break to the lowest id."""
    if not partition.clusters:
        raise ValueError("empty partition")
    best = None
    best_count = -1
    for ci, cl in enumerate(partition.clusters):
        count = sum(1 for q in cl if q < schedule.n_data)
        if count > best_count:
            best, best_count = ci, count
    return best
