"""Detector error model extraction and minimum-weight perfect matching.

``build_dem`` propagates every alternative of every noise channel (except
channels tagged "dropout", which stay in the sampled circuit but are
deliberately hidden from the decoder) through the circuit in one
column-vectorized pass per chunk, then merges identical symptoms.

``to_matching_graph`` reduces the model to weighted edges between
detectors (single-detector mechanisms attach to a per-component virtual
boundary; wider mechanisms are decomposed into pairs of existing edges or
dropped with their probability mass accounted).

``mwpm_decode`` matches each shot's defects per connected sector on the
complete defect graph, with distances and path observable-masks taken from
all-pairs Dijkstra over the matching graph, and an exact blossom solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._blossom import min_weight_perfect_matching
from ._kernels import dijkstra_all, walk_path_mask
from .circuit import CircuitProgram
from .sim import ColumnPropagator, ShotOutcomes, channel_alternatives

__all__ = [
    "DetectorErrorModel",
    "MatchingGraph",
    "build_dem",
    "to_matching_graph",
    "mwpm_decode",
    "score_predictions",
    "write_dem",
    "parse_dem",
    "dump_matching_graph",
]

_NOISE_OPS = ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR")


@dataclass
class DetectorErrorModel:
    n_detectors: int
    n_observables: int
    mechanisms: list          # [(p, dets tuple(sorted), obs_mask int)]
    undetectable_mass: float = 0.0

    def __post_init__(self):
        for p, dets, _ in self.mechanisms:
            if not (0.0 < p <= 1.0):
                raise ValueError(f"mechanism probability {p} out of range")
            if tuple(sorted(set(dets))) != tuple(dets):
                raise ValueError("mechanism detector sets must be sorted and unique")


def _xor_p(p1: float, p2: float) -> float:
    return p1 * (1.0 - p2) + p2 * (1.0 - p1)


def build_dem(exp, chunk: int = 4096) -> DetectorErrorModel:
    """Exact symptom propagation for every non-dropout channel alternative.

    Within a channel, alternatives with identical symptoms add their
    probabilities (they are mutually exclusive); across channels, identical
    mechanisms combine like independent parity flips."""
    program: CircuitProgram = getattr(exp, "program", exp)
    cols: list = []         # (instr_index, terms, prob, channel_serial)
    serial = 0
    for i, instr in enumerate(program.instructions):
        if instr.opcode not in _NOISE_OPS:
            continue
        if "dropout" in program.tags_for(i):
            continue
        if not instr.params or instr.params[0] <= 0.0:
            continue
        for terms, p in channel_alternatives(instr):
            cols.append((i, terms, p, serial))
        serial += 1

    merged: dict = {}
    for lo in range(0, len(cols), chunk):
        block = cols[lo:lo + chunk]
        injections = [(i, terms) for i, terms, _, _ in block]
        out = ColumnPropagator(program, injections).run()
        det_bits = out.detector_bits()
        obs_bits = out.observable_bits()
        shots_idx, det_idx = np.nonzero(det_bits.T)
        split = np.searchsorted(shots_idx, np.arange(len(block) + 1))
        masks = np.zeros(len(block), dtype=np.uint64)
        for kk in range(obs_bits.shape[0]):
            masks |= obs_bits[kk].astype(np.uint64) << np.uint64(kk)
        per_channel: dict = {}
        for c in range(len(block)):
            dets = tuple(det_idx[split[c]:split[c + 1]].tolist())
            mask = int(masks[c])
            _, _, p, ch_serial = block[c]
            key = (ch_serial, dets, mask)
            per_channel[key] = per_channel.get(key, 0.0) + p
        for (ch_serial, dets, mask), p in per_channel.items():
            if not dets and mask == 0:
                continue
            key = (dets, mask)
            if key in merged:
                merged[key] = _xor_p(merged[key], p)
            else:
                merged[key] = p

    undetectable = 0.0
    mechanisms = []
    for (dets, mask), p in sorted(merged.items()):
        if p <= 0.0:
            continue
        if not dets:
            undetectable += p
            continue
        mechanisms.append((p, dets, mask))
    return DetectorErrorModel(program.num_detectors, program.num_observables,
                              mechanisms, undetectable_mass=undetectable)


# -- graphlike reduction ------------------------------------------------------------


_BOUNDARY = -1


@dataclass
class _Sector:
    nodes: list               # detector ids; boundary, if present, is last
    has_boundary: bool
    indptr: np.ndarray = None
    indices: np.ndarray = None
    weights: np.ndarray = None
    masks: np.ndarray = None
    dist: np.ndarray = None
    pred: np.ndarray = None


@dataclass
class MatchingGraph:
    n_detectors: int
    n_observables: int
    edges: dict               # (u, v) u<v, v may be _BOUNDARY -> (p, weight, mask)
    dropped_mass: float
    shadowed_mass: float
    total_mass: float
    mask_mismatch_mass: float = 0.0
    sector_of: np.ndarray = None     # detector -> sector id (-1: isolated)
    sectors: list = field(default_factory=list)

    def weight_of(self, u: int, v: int) -> float:
        key = (min(u, v), max(u, v)) if v != _BOUNDARY else (u, _BOUNDARY)
        return self.edges[key][1]


def _edge_key(dets) -> tuple:
    if len(dets) == 1:
        return (dets[0], _BOUNDARY)
    return (min(dets), max(dets))


def to_matching_graph(dem: DetectorErrorModel,
                      drop_threshold: float = 1e-3) -> MatchingGraph:
    """Reduce a DEM to a weighted matching graph.

    Mechanisms with one or two detectors become edges (single-detector ones
    lead to a virtual boundary).  Wider mechanisms decompose greedily into
    two existing edges whose symptom XOR matches exactly; undecomposable
    mass above ``drop_threshold`` (as a fraction of total mass) is a hard
    error."""
    edges: dict = {}
    shadowed = 0.0
    total = sum(p for p, _, _ in dem.mechanisms)
    wide = []
    for p, dets, mask in dem.mechanisms:
        if len(dets) <= 2:
            key = _edge_key(dets)
            if key not in edges:
                edges[key] = {}
            bucket = edges[key]
            bucket[mask] = _xor_p(bucket.get(mask, 0.0), p)
        else:
            wide.append((p, dets, mask))

    # same-mask parallels already merged; different masks keep the heavier
    # probability only as shadow accounting
    flat: dict = {}
    for key, bucket in edges.items():
        best_mask = max(bucket, key=lambda m: (bucket[m], -m))
        for m, p in bucket.items():
            if m != best_mask:
                shadowed += p
        flat[key] = [bucket[best_mask], best_mask]

    dropped = 0.0
    mask_mismatch = 0.0
    wide.sort(key=lambda t: (-len(t[1]), t[1]))
    for p, dets, mask in wide:
        used = _decompose(flat, dets, mask)
        if used is None:
            # distance-2 style degeneracy: no edge set reproduces the
            # observable mask exactly; fold the probability anyway and
            # account for the ambiguous logical content
            used = _decompose(flat, dets, None)
            if used is not None:
                mask_mismatch += p
        if used is None:
            dropped += p
            continue
        for key in used:
            flat[key][0] = _xor_p(flat[key][0], p)

    if total > 0 and dropped > drop_threshold * total:
        raise ValueError(
            f"undecomposable mechanism mass {dropped:.3e} exceeds "
            f"{drop_threshold:.1e} of total {total:.3e}")

    final_edges: dict = {}
    for key, (p, mask) in flat.items():
        p = min(max(p, 1e-300), 1.0 - 1e-15)
        if p >= 0.5:
            # complement convention: such an edge is effectively free
            w = 0.0
        else:
            w = math.log((1.0 - p) / p)
        final_edges[key] = (p, w, mask)

    g = MatchingGraph(dem.n_detectors, dem.n_observables, final_edges,
                      dropped, shadowed, total, mask_mismatch)
    _build_sectors(g)
    return g


def _decompose(flat: dict, dets, mask) -> list | None:
    """Partition a wide mechanism's detectors into existing edges (pairs or
    boundary singletons) whose observable masks XOR to the mechanism's;
    ``mask=None`` accepts any mask.  Depth-first over partners of the
    lowest uncovered detector."""
    dets = tuple(sorted(dets))
    if len(dets) > 8:
        return None

    def dfs(rest: tuple, acc_mask: int, used: list):
        if not rest:
            ok = mask is None or acc_mask == mask
            return list(used) if ok else None
        d0 = rest[0]
        for j in range(1, len(rest)):
            key = (d0, rest[j])
            if key in flat:
                used.append(key)
                r = dfs(rest[1:j] + rest[j + 1:], acc_mask ^ flat[key][1], used)
                if r is not None:
                    return r
                used.pop()
        key = (d0, _BOUNDARY)
        if key in flat:
            used.append(key)
            r = dfs(rest[1:], acc_mask ^ flat[key][1], used)
            if r is not None:
                return r
            used.pop()
        return None

    return dfs(dets, 0, [])


def _build_sectors(g: MatchingGraph) -> None:
    """Connected components of the edge set; a component gets a boundary
    node iff any of its detectors has a boundary edge."""
    parent = {}

    def find(x):
        while parent.get(x, x) != x:
            parent[x] = parent.get(parent[x], parent[x])
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    dets_seen = set()
    for (u, v) in g.edges:
        dets_seen.add(u)
        parent.setdefault(u, u)
        if v != _BOUNDARY:
            dets_seen.add(v)
            parent.setdefault(v, v)
            union(u, v)
    comp_nodes: dict = {}
    for d in sorted(dets_seen):
        comp_nodes.setdefault(find(d), []).append(d)

    sector_of = np.full(g.n_detectors, -1, dtype=np.int64)
    g.sectors = []
    for root in sorted(comp_nodes):
        nodes = comp_nodes[root]
        has_boundary = any((d, _BOUNDARY) in g.edges for d in nodes)
        sid = len(g.sectors)
        for d in nodes:
            sector_of[d] = sid
        sec = _Sector(nodes=nodes, has_boundary=has_boundary)
        _sector_csr(g, sec)
        g.sectors.append(sec)
    g.sector_of = sector_of


def _sector_csr(g: MatchingGraph, sec: _Sector) -> None:
    idx = {d: i for i, d in enumerate(sec.nodes)}
    n = len(sec.nodes) + (1 if sec.has_boundary else 0)
    b_idx = n - 1 if sec.has_boundary else None
    adj: list = [[] for _ in range(n)]
    for (u, v), (p, w, mask) in g.edges.items():
        if u not in idx:
            continue
        iu = idx[u]
        iv = b_idx if v == _BOUNDARY else idx.get(v)
        if iv is None:
            continue
        adj[iu].append((iv, w, mask))
        adj[iv].append((iu, w, mask))
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + len(adj[i])
    indices = np.zeros(indptr[-1], dtype=np.int64)
    weights = np.zeros(indptr[-1], dtype=np.float64)
    masks = np.zeros(indptr[-1], dtype=np.uint64)
    for i in range(n):
        for j, (iv, w, m) in enumerate(sorted(adj[i])):
            e = indptr[i] + j
            indices[e] = iv
            weights[e] = w
            masks[e] = m
    sec.indptr, sec.indices, sec.weights, sec.masks = \
        indptr, indices, weights, masks


def _sector_paths(sec: _Sector) -> None:
    if sec.dist is not None:
        return
    n = sec.indptr.shape[0] - 1
    sec.dist = np.empty((n, n), dtype=np.float64)
    sec.pred = np.empty((n, n), dtype=np.int64)
    dijkstra_all(sec.indptr, sec.indices, sec.weights, sec.dist, sec.pred)


# -- decoding -----------------------------------------------------------------------


def mwpm_decode(graph: MatchingGraph, outcomes: ShotOutcomes) -> np.ndarray:
    """Predicted observable masks, one uint64 per shot.

    Defects are matched per sector on the complete defect graph weighted by
    shortest-path distances; corrections accumulate the observable masks of
    the edges along matched paths."""
    shots = outcomes.shots
    preds = np.zeros(shots, dtype=np.uint64)
    if outcomes.num_detectors == 0:
        return preds
    det_bits = outcomes.detector_bits()
    shot_idx, det_idx = np.nonzero(det_bits.T)
    split = np.searchsorted(shot_idx, np.arange(shots + 1))
    for s in range(shots):
        defects = det_idx[split[s]:split[s + 1]]
        if defects.size == 0:
            continue
        preds[s] = _decode_one(graph, defects)
    return preds


def _decode_one(graph: MatchingGraph, defects: np.ndarray) -> int:
    by_sector: dict = {}
    for d in defects:
        sid = graph.sector_of[d]
        if sid < 0:
            raise ValueError(f"defect at isolated detector {d}")
        by_sector.setdefault(sid, []).append(d)
    mask = 0
    for sid, ds in by_sector.items():
        sec = graph.sectors[sid]
        _sector_paths(sec)
        idx = {node: i for i, node in enumerate(sec.nodes)}
        local = np.array([idx[d] for d in ds], dtype=np.int64)
        m = local.size
        if not sec.has_boundary:
            if m % 2:
                raise ValueError(
                    f"odd defect count {m} in boundary-less sector {sid}")
            w = sec.dist[np.ix_(local, local)].copy()
            np.fill_diagonal(w, 0.0)
            match = min_weight_perfect_matching(w)
            for i in range(m):
                j = int(match[i])
                if j > i:
                    mask ^= _path_mask(sec, int(local[i]), int(local[j]))
        else:
            # duplicate the defects as virtual boundary copies: a defect may
            # pair with any copy at its own boundary distance (copies are
            # interchangeable), and leftover copies pair off at zero cost
            bi = _b_index(sec)
            n2 = 2 * m
            w = np.zeros((n2, n2), dtype=np.float64)
            w[:m, :m] = sec.dist[np.ix_(local, local)]
            bdist = sec.dist[local, bi]
            w[:m, m:] = bdist[:, None]
            w[m:, :m] = bdist[None, :]
            np.fill_diagonal(w, 0.0)
            match = min_weight_perfect_matching(w)
            for i in range(m):
                j = int(match[i])
                if j >= m:
                    mask ^= _path_mask(sec, int(local[i]), bi)
                elif j > i:
                    mask ^= _path_mask(sec, int(local[i]), int(local[j]))
    return mask


def _b_index(sec: _Sector) -> int:
    return sec.indptr.shape[0] - 2


def _path_mask(sec: _Sector, u: int, v: int) -> int:
    m = walk_path_mask(sec.pred[u], sec.indptr, sec.indices, sec.masks, u, v)
    if m == np.uint64(0xFFFFFFFFFFFFFFFF):
        raise RuntimeError(f"broken shortest path {u} -> {v}")
    return int(m)


def score_predictions(predictions: np.ndarray,
                      outcomes: ShotOutcomes) -> dict:
    """Per-observable and any-observable error counts.

    A shot errs when the predicted mask differs from the actual observable
    bits in any position."""
    k = outcomes.num_observables
    shots = outcomes.shots
    obs_bits = outcomes.observable_bits()
    actual = np.zeros(shots, dtype=np.uint64)
    for kk in range(k):
        actual |= obs_bits[kk].astype(np.uint64) << np.uint64(kk)
    diff = predictions ^ actual
    per_obs = [int(((diff >> np.uint64(kk)) & np.uint64(1)).sum())
               for kk in range(k)]
    any_err = int((diff != 0).sum())
    return {"shots": shots, "errors_any": any_err, "errors_per_obs": per_obs}


def dump_matching_graph(g: MatchingGraph) -> str:
    """Human-readable matching-graph listing for debugging."""
    lines = [f"# detectors={g.n_detectors} sectors={len(g.sectors)} "
             f"dropped={g.dropped_mass:.3e} shadowed={g.shadowed_mass:.3e} "
             f"mask_mismatch={g.mask_mismatch_mass:.3e}"]
    for sid, sec in enumerate(g.sectors):
        lines.append(f"sector {sid}: {len(sec.nodes)} detectors"
                     f"{' + boundary' if sec.has_boundary else ''}")
    for (u, v), (p, w, mask) in sorted(g.edges.items()):
        tgt = "boundary" if v == _BOUNDARY else f"D{v}"
        obs = f" L{mask:b}" if mask else ""
        lines.append(f"edge D{u} {tgt} p={p:.6g} w={w:.6g}{obs}")
    return "\n".join(lines) + "\n"


# -- DEM text format -----------------------------------------------------------------


def write_dem(dem: DetectorErrorModel) -> str:
    lines = [f"# detectors={dem.n_detectors} observables={dem.n_observables}"]
    for p, dets, mask in dem.mechanisms:
        parts = [f"error({p!r})"]
        parts.extend(f"D{d}" for d in dets)
        kk = 0
        m = mask
        while m:
            if m & 1:
                parts.append(f"L{kk}")
            m >>= 1
            kk += 1
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_dem(text: str) -> DetectorErrorModel:
    n_det = 0
    n_obs = 0
    mechanisms = []
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("detectors="):
                    n_det = int(tok.split("=")[1])
                elif tok.startswith("observables="):
                    n_obs = int(tok.split("=")[1])
            continue
        if not line:
            continue
        if not line.startswith("error("):
            raise ValueError(f"bad DEM line: {line!r}")
        close = line.index(")")
        p = float(line[6:close])
        dets = []
        mask = 0
        for tok in line[close + 1:].split():
            if tok.startswith("D"):
                dets.append(int(tok[1:]))
            elif tok.startswith("L"):
                mask |= 1 << int(tok[1:])
            else:
                raise ValueError(f"bad DEM target {tok!r}")
        mechanisms.append((p, tuple(sorted(dets)), mask))
        n_det = max(n_det, max(dets, default=-1) + 1)
    return DetectorErrorModel(n_det, n_obs, mechanisms)
