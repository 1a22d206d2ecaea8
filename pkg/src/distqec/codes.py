"""Code constructions and measurement schedules.

Stabilizer codes (unrotated toric, repetition) carry explicit stabilizer
and logical Pauli strings.  Floquet codes are 3-regular, 3-edge-colored
lattices whose weight-2 checks are measured color by color in a period-3
schedule.

A :class:`ScheduleTemplate` abstracts one code round: which checks are
measured in which sub-round, with which ancillas (stabilizer codes only).
:func:`measurement_plan` expands a template to a concrete experiment
length, producing detector and observable definitions over abstract
outcome events.  For stabilizer codes the plan is analytic; for Floquet
lattices it is discovered by symbolic simulation, with homologically
nontrivial relations promoted to observables and the rest kept as
detectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .analysis import SymbolicRunner

__all__ = [
    "StabilizerCode",
    "FloquetLattice",
    "ObservableSpec",
    "Check",
    "ScheduleTemplate",
    "MeasurementPlan",
    "build_toric",
    "build_repetition",
    "build_honeycomb",
    "load_floquet_lattice",
    "export_floquet_lattice",
    "make_schedule",
    "measurement_plan",
    "gf2_rank",
    "commutes",
]

Terms = tuple  # tuple[(qubit, axis), ...]


# -- GF(2) / symplectic helpers ---------------------------------------------------


def _to_symplectic(terms, n: int) -> np.ndarray:
    v = np.zeros(2 * n, dtype=bool)
    for q, ax in terms:
        if ax in ("X", "Y"):
            v[q] ^= True
        if ax in ("Z", "Y"):
            v[n + q] ^= True
    return v


def commutes(a, b, n: int) -> bool:
    va, vb = _to_symplectic(a, n), _to_symplectic(b, n)
    sym = np.count_nonzero(va[:n] & vb[n:]) + np.count_nonzero(va[n:] & vb[:n])
    return sym % 2 == 0


def gf2_rank(rows: np.ndarray) -> int:
    """Rank of a boolean matrix over GF(2), by Gaussian elimination."""
    m = rows.copy().astype(bool)
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        pivot = None
        for r in range(rank, n_rows):
            if m[r, col]:
                pivot = r
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hit = m[:, col].copy()
        hit[rank] = False
        m[hit] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


# -- stabilizer codes ---------------------------------------------------------------


@dataclass
class StabilizerCode:
    """n data qubits, a stabilizer list, and paired logical operators."""

    n: int
    stabilizers: list
    logical_x: list
    logical_z: list
    k: int
    d: int
    name: str = "stabilizer"

    def symplectic_stabilizers(self) -> np.ndarray:
        return np.stack([_to_symplectic(s, self.n) for s in self.stabilizers])

    def validate(self) -> list[str]:
        v = []
        for i, a in enumerate(self.stabilizers):
            for j in range(i + 1, len(self.stabilizers)):
                if not commutes(a, self.stabilizers[j], self.n):
                    v.append(f"stabilizers {i},{j} anticommute")
        rank = gf2_rank(self.symplectic_stabilizers())
        if rank != self.n - self.k:
            v.append(f"stabilizer rank {rank} != n-k = {self.n - self.k}")
        for i, lx in enumerate(self.logical_x):
            for j, lz in enumerate(self.logical_z):
                want = (i != j)
                if commutes(lx, lz, self.n) != want:
                    v.append(f"logical pairing broken at X[{i}], Z[{j}]")
            for s_idx, s in enumerate(self.stabilizers):
                if not commutes(lx, s, self.n):
                    v.append(f"logical X[{i}] anticommutes with stabilizer {s_idx}")
        for j, lz in enumerate(self.logical_z):
            for s_idx, s in enumerate(self.stabilizers):
                if not commutes(lz, s, self.n):
                    v.append(f"logical Z[{j}] anticommutes with stabilizer {s_idx}")
        return v


def build_toric(d: int) -> StabilizerCode:
    """Unrotated toric code on a d x d torus: n = 2d^2, k = 2.

    Qubits live on edges: horizontal edge (r, c) joins vertices (r, c) and
    (r, c+1) and has index r*d + c; vertical edge (r, c) joins (r, c) and
    (r+1, c) at index d^2 + r*d + c.
    """
    if d < 2:
        raise ValueError("toric code needs d >= 2")

    def h(r, c):
        return (r % d) * d + (c % d)

    def v(r, c):
        return d * d + (r % d) * d + (c % d)

    stabilizers = []
    # vertex (star) X stabilizers
    for r in range(d):
        for c in range(d):
            stabilizers.append((
                (h(r, c), "X"), (h(r, c - 1), "X"),
                (v(r, c), "X"), (v(r - 1, c), "X"),
            ))
    # plaquette Z stabilizers
    for r in range(d):
        for c in range(d):
            stabilizers.append((
                (h(r, c), "Z"), (h(r + 1, c), "Z"),
                (v(r, c), "Z"), (v(r, c + 1), "Z"),
            ))
    logical_z = [
        tuple((h(0, c), "Z") for c in range(d)),
        tuple((v(r, 0), "Z") for r in range(d)),
    ]
    logical_x = [
        tuple((h(r, 0), "X") for r in range(d)),
        tuple((v(0, c), "X") for c in range(d)),
    ]
    return StabilizerCode(2 * d * d, stabilizers, logical_x, logical_z,
                          k=2, d=d, name=f"toric-d{d}")


def build_repetition(d: int) -> StabilizerCode:
    """Z-basis repetition code: protects against X flips, k = 1."""
    if d < 2:
        raise ValueError("repetition code needs d >= 2")
    stabilizers = [((i, "Z"), (i + 1, "Z")) for i in range(d - 1)]
    return StabilizerCode(d, stabilizers,
                          logical_x=[tuple((i, "X") for i in range(d))],
                          logical_z=[((0, "Z"),)],
                          k=1, d=d, name=f"repetition-d{d}")


# -- Floquet lattices ------------------------------------------------------------------


@dataclass
class ObservableSpec:
    """One logical readout: the supporting edge cycle, per-phase check
    inclusions (empty when the representative is static), and the
    transversal basis that reads it out."""

    path_edges: list
    phase_updates: dict = field(default_factory=dict)
    final_basis: str = "Z"


@dataclass
class FloquetLattice:
    n_vertices: int
    edges: list          # [(u, v, color)]
    faces: list          # [[edge_idx, ...]]
    genus: int
    fine_f: int | None = None
    base_n: int | None = None
    observable_specs: list = field(default_factory=list)
    # two reference edge cuts for Z2 winding classification (builders fill
    # these in; loaded lattices may omit them)
    cuts: tuple | None = None
    name: str = "floquet"

    @property
    def k(self) -> int:
        return 2 * self.genus

    def validate(self) -> list[str]:
        v = []
        n = self.n_vertices
        deg = np.zeros(n, dtype=int)
        seen_colors: dict[int, set] = {}
        for idx, (a, b, c) in enumerate(self.edges):
            if not (0 <= a < n and 0 <= b < n) or a == b:
                v.append(f"edge {idx} has bad endpoints ({a}, {b})")
                continue
            if c not in (0, 1, 2):
                v.append(f"edge {idx} has color {c}")
            deg[a] += 1
            deg[b] += 1
            for q in (a, b):
                cs = seen_colors.setdefault(q, set())
                if c in cs:
                    v.append(f"vertex {q} has two color-{c} edges")
                cs.add(c)
        if not (deg == 3).all():
            bad = np.flatnonzero(deg != 3)[:5]
            v.append(f"graph not 3-regular at vertices {bad.tolist()}")
        for f_idx, face in enumerate(self.faces):
            if not self._face_closed(face):
                v.append(f"face {f_idx} is not a closed cycle")
        chi = n - len(self.edges) + len(self.faces)
        if chi != 2 - 2 * self.genus:
            v.append(f"Euler characteristic {chi} != 2 - 2*genus = {2 - 2 * self.genus}")
        if self.fine_f is not None and self.base_n is not None:
            if self.n_vertices != self.base_n * self.fine_f ** 2:
                v.append(
                    f"vertex count {self.n_vertices} != base_n*f^2 = "
                    f"{self.base_n * self.fine_f ** 2}")
        return v

    def _face_closed(self, face) -> bool:
        if len(face) < 2:
            return False
        ends = [set(self.edges[e][:2]) for e in face]
        for i in range(len(face)):
            if not ends[i] & ends[(i + 1) % len(face)]:
                return False
        # every vertex on the face touches exactly two of its edges
        from collections import Counter
        cnt = Counter()
        for e in face:
            cnt[self.edges[e][0]] += 1
            cnt[self.edges[e][1]] += 1
        return all(c == 2 for c in cnt.values())


def build_honeycomb(a: int, b: int) -> FloquetLattice:
    """Honeycomb lattice on an a x b torus of unit cells.

    Each cell (i, j) holds two vertices A, B.  Edge colors follow the
    three orientation classes: color 0 = A(i,j)-B(i,j), color 1 =
    B(i,j)-A(i+1,j), color 2 = B(i,j)-A(i,j+1).  V = 2ab, E = 3ab,
    F = ab hexagons, genus 1.  The check Pauli of a color-c edge is
    XX/YY/ZZ for c = 0/1/2.
    """
    if a < 2 or b < 2:
        raise ValueError("honeycomb torus needs a, b >= 2: degenerate faces")
    if a % 2 or b % 2:
        raise ValueError("honeycomb torus needs even a, b for a consistent "
                         "check-cycle structure")

    def A(i, j):
        return 2 * ((i % a) * b + (j % b))

    def B(i, j):
        return A(i, j) + 1

    edges = []
    e_idx: dict[tuple, int] = {}
    for i in range(a):
        for j in range(b):
            for color, (u, v) in enumerate((
                (A(i, j), B(i, j)),
                (B(i, j), A(i + 1, j)),
                (B(i, j), A(i, j + 1)),
            )):
                e_idx[(i % a, j % b, color)] = len(edges)
                edges.append((u, v, color))

    faces = []
    for i in range(a):
        for j in range(b):
            faces.append([
                e_idx[(i % a, j % b, 0)],
                e_idx[(i % a, j % b, 1)],
                e_idx[((i + 1) % a, (j - 1) % b, 2)],
                e_idx[((i + 1) % a, (j - 1) % b, 0)],
                e_idx[((i) % a, (j - 1) % b, 1)],
                e_idx[(i % a, (j - 1) % b, 2)],
            ])

    # winding reference cuts: color-1 edges crossing i = 0, color-2 edges
    # crossing j = 0
    cut_i = {e_idx[(a - 1, j, 1)] for j in range(b)}
    cut_j = {e_idx[(i, b - 1, 2)] for i in range(a)}

    # static logical candidates: the (color0, color1) zig-zag cycle through
    # cell column j=0 wraps the i direction and crosses only ZZ edges, so
    # its Z product commutes with every check; the (color0, color2) cycle
    # wraps j and crosses YY edges, needing a Y readout.
    wrap_i = []
    for i in range(a):
        wrap_i.append(e_idx[(i, 0, 0)])
        wrap_i.append(e_idx[(i, 0, 1)])
    wrap_j = []
    for j in range(b):
        wrap_j.append(e_idx[(0, j, 0)])
        wrap_j.append(e_idx[(0, j, 2)])
    specs = [
        ObservableSpec(path_edges=wrap_i, final_basis="Z"),
        ObservableSpec(path_edges=wrap_j, final_basis="Y"),
    ]
    return FloquetLattice(2 * a * b, edges, faces, genus=1,
                          observable_specs=specs, cuts=(cut_i, cut_j),
                          name=f"honeycomb-{a}x{b}")


# -- lattice files ----------------------------------------------------------------------


def export_floquet_lattice(lattice: FloquetLattice) -> str:
    doc = {
        "name": lattice.name,
        "base_n": lattice.base_n,
        "f": lattice.fine_f,
        "genus": lattice.genus,
        "vertices": lattice.n_vertices,
        "edges": [list(e) for e in lattice.edges],
        "faces": [list(f) for f in lattice.faces],
        "observables": [
            {"path_edges": list(s.path_edges),
             "phase_updates": {str(k): v for k, v in s.phase_updates.items()},
             "final_basis": s.final_basis}
            for s in lattice.observable_specs
        ],
    }
    if lattice.cuts is not None:
        doc["cuts"] = [sorted(lattice.cuts[0]), sorted(lattice.cuts[1])]
    return json.dumps(doc, indent=1)


def load_floquet_lattice(document: str) -> FloquetLattice:
    """Parse and validate a lattice document (JSON text).

    Raises ValueError naming the first violated invariant.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ValueError(f"lattice document is not valid JSON: {e}") from None
    for key in ("name", "genus", "vertices", "edges", "faces"):
        if key not in doc:
            raise ValueError(f"lattice document missing field {key!r}")
    specs = [
        ObservableSpec(path_edges=list(s["path_edges"]),
                       phase_updates={int(k): v for k, v in
                                      s.get("phase_updates", {}).items()},
                       final_basis=s.get("final_basis", "Z"))
        for s in doc.get("observables", [])
    ]
    cuts = None
    if "cuts" in doc:
        cuts = (set(doc["cuts"][0]), set(doc["cuts"][1]))
    lat = FloquetLattice(
        n_vertices=int(doc["vertices"]),
        edges=[tuple(e) for e in doc["edges"]],
        faces=[list(f) for f in doc["faces"]],
        genus=int(doc["genus"]),
        fine_f=doc.get("f"),
        base_n=doc.get("base_n"),
        observable_specs=specs,
        cuts=cuts,
        name=doc["name"],
    )
    violations = lat.validate()
    if violations:
        raise ValueError("invalid lattice: " + "; ".join(violations[:5]))
    return lat


# -- schedules ------------------------------------------------------------------------


@dataclass
class Check:
    """One measured operator: data-qubit terms in gate order, plus the
    ancilla qubit id for stabilizer-code checks (None for Floquet edges)."""

    id: int
    terms: Terms
    basis: str              # 'X'/'Z' stabilizer type or edge Pauli
    ancilla: int | None = None
    edge: int | None = None  # edge index for Floquet checks


@dataclass
class ScheduleTemplate:
    kind: str                    # 'stabilizer' | 'floquet'
    n_data: int
    n_anc: int
    checks: list
    sub_rounds: list             # per sub-round: list of check ids
    period: int
    source: object = None        # the code or lattice
    final_basis: str = "Z"

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_anc

    def qubits_in_sub_round(self, t: int):
        out = []
        for cid in self.sub_rounds[t % self.period]:
            ch = self.checks[cid]
            out.extend(q for q, _ in ch.terms)
            if ch.ancilla is not None:
                out.append(ch.ancilla)
        return out


@dataclass
class MeasurementPlan:
    """Detector/observable definitions over abstract outcome events.

    Events are indexed in emission order: all check outcomes round by
    round, sub-round by sub-round (check order within a sub-round), then
    one final readout per data qubit (qubit order).  A reference is
    ("check", event_ordinal) or ("final", qubit)."""

    rounds: int
    detectors: list          # list of ref lists
    observables: list        # list of (obs_index, ref list)
    final_basis: str


def make_schedule(code) -> ScheduleTemplate:
    if isinstance(code, StabilizerCode):
        return _stabilizer_schedule(code)
    if isinstance(code, FloquetLattice):
        return _floquet_schedule(code)
    raise TypeError(f"cannot schedule {type(code).__name__}")


def _stabilizer_schedule(code: StabilizerCode) -> ScheduleTemplate:
    checks = []
    x_first = sorted(range(len(code.stabilizers)),
                     key=lambda i: (0 if all(ax == "X" for _, ax in
                                             code.stabilizers[i]) else 1, i))
    for cid, s_idx in enumerate(x_first):
        terms = code.stabilizers[s_idx]
        basis = "X" if all(ax == "X" for _, ax in terms) else \
            "Z" if all(ax == "Z" for _, ax in terms) else "M"
        checks.append(Check(cid, tuple(terms), basis, ancilla=code.n + cid))
    return ScheduleTemplate(
        kind="stabilizer",
        n_data=code.n,
        n_anc=len(checks),
        checks=checks,
        sub_rounds=[[c.id for c in checks]],
        period=1,
        source=code,
    )


def _floquet_schedule(lattice: FloquetLattice) -> ScheduleTemplate:
    pauli = {0: "X", 1: "Y", 2: "Z"}
    checks = []
    by_color: dict[int, list[int]] = {0: [], 1: [], 2: []}
    for e_idx, (u, v, c) in enumerate(lattice.edges):
        ax = pauli[c]
        cid = len(checks)
        checks.append(Check(cid, ((u, ax), (v, ax)), ax, edge=e_idx))
        by_color[c].append(cid)
    return ScheduleTemplate(
        kind="floquet",
        n_data=lattice.n_vertices,
        n_anc=0,
        checks=checks,
        sub_rounds=[by_color[0], by_color[1], by_color[2]],
        period=3,
        source=lattice,
    )


# -- measurement plans ---------------------------------------------------------------


def measurement_plan(schedule: ScheduleTemplate, rounds: int) -> MeasurementPlan:
    """Expand a schedule to ``rounds`` code rounds plus a final transversal
    readout, and derive detector/observable reference lists."""
    if rounds < 1:
        raise ValueError("need at least one round")
    if schedule.kind == "stabilizer":
        return _stabilizer_plan(schedule, rounds)
    return _floquet_plan(schedule, rounds)


def _stabilizer_plan(schedule: ScheduleTemplate, rounds: int) -> MeasurementPlan:
    code: StabilizerCode = schedule.source
    n_checks = len(schedule.checks)

    def ev(check_id: int, r: int) -> tuple:
        return ("check", r * n_checks + check_id)

    detectors = []
    for ch in schedule.checks:
        z_type = ch.basis == "Z"
        if z_type:
            detectors.append([ev(ch.id, 0)])
        for r in range(1, rounds):
            detectors.append([ev(ch.id, r - 1), ev(ch.id, r)])
        if z_type:
            refs = [ev(ch.id, rounds - 1)]
            refs.extend(("final", q) for q, _ in ch.terms)
            detectors.append(refs)
    observables = []
    for k, lz in enumerate(code.logical_z):
        observables.append((k, [("final", q) for q, _ in lz]))
    return MeasurementPlan(rounds, detectors, observables, final_basis="Z")


def _floquet_plan(schedule: ScheduleTemplate, rounds: int) -> MeasurementPlan:
    """Symbolic discovery: run the abstract experiment noiselessly; every
    deterministic outcome relation with constant 0 becomes a detector.
    Homologically nontrivial relations are the logical content: one
    representative per independent winding class becomes an observable and
    the rest are demoted to detectors by differencing against it."""
    lattice: FloquetLattice = schedule.source
    runner = SymbolicRunner(schedule.n_data)
    event_checks: list[int] = []
    for _ in range(rounds):
        for t in range(schedule.period):
            for cid in schedule.sub_rounds[t]:
                runner.measure(list(schedule.checks[cid].terms))
                event_checks.append(cid)
    n_events = len(event_checks)
    for q in range(schedule.n_data):
        runner.measure([(q, schedule.final_basis)])

    relations = []
    for rel in runner.relations:
        if not rel.deterministic or rel.const != 0:
            continue
        refs = frozenset(
            ("check", m) if m < n_events else ("final", m - n_events)
            for m in rel.detector_refs()
        )
        relations.append(refs)

    if lattice.cuts is not None:
        classify = lambda refs: _relation_class(lattice, event_checks,
                                                schedule, refs)
        detectors, observables = _split_by_class(relations, classify)
    else:
        # no winding data: trust the declared observable specs
        detectors, observables = _split_by_declared(schedule, lattice,
                                                    relations)
    det_sorted = [sorted(d) for d in detectors]
    det_sorted.sort()
    return MeasurementPlan(rounds, det_sorted, observables,
                           final_basis=schedule.final_basis)


def _relation_class(lattice: FloquetLattice, event_checks, schedule,
                    refs) -> tuple[int, int]:
    """Z2 homology class of a relation: parity of its edge support against
    the lattice's two reference cuts.  The edge support combines check
    references and the zig-zag cycle edges inside the final-readout
    support."""
    cut_i, cut_j = lattice.cuts
    edge_par: dict[int, int] = {}
    final_support = set()
    for ref in refs:
        if ref[0] == "check":
            cid = event_checks[ref[1]]
            e = schedule.checks[cid].edge
            edge_par[e] = edge_par.get(e, 0) ^ 1
        else:
            final_support.add(ref[1])
    # edges of the zig-zag cycles inside the final support: for a Z (Y)
    # readout those are the non-ZZ (non-YY) edges joining supported vertices
    skip = {"Z": 2, "Y": 1, "X": 0}[schedule.final_basis]
    for e_idx, (u, v, c) in enumerate(lattice.edges):
        if c != skip and u in final_support and v in final_support:
            edge_par[e_idx] = edge_par.get(e_idx, 0) ^ 1
    # a chain with boundary is a re-measurement identity: its value is
    # state-independent, so it is a detector regardless of cut crossings;
    # only closed chains carry homology
    boundary: set[int] = set()
    for e, par in edge_par.items():
        if par:
            u, v, _ = lattice.edges[e]
            boundary ^= {u}
            boundary ^= {v}
    if boundary:
        return (0, 0)
    wi = sum(p for e, p in edge_par.items() if e in cut_i) % 2
    wj = sum(p for e, p in edge_par.items() if e in cut_j) % 2
    return (wi, wj)


def _split_by_class(relations, classify) -> tuple[list, list]:
    trivial: list = []
    nontrivial: list = []
    for refs in relations:
        w = classify(refs)
        cls = 2 * w[0] + w[1]
        if cls == 0:
            trivial.append(refs)
        else:
            nontrivial.append((cls, refs))
    # one representative per independent class becomes an observable;
    # everything else reduces against those and lands back in the detectors.
    # Prefer representatives anchored on the final readout (fewest check
    # references), so the observable spans the whole memory window rather
    # than reading the logical out of an early reconstruction.
    def rep_key(cv):
        refs = cv[1]
        n_checks = sum(1 for r in refs if r[0] == "check")
        return (n_checks, len(refs), sorted(refs))

    nontrivial.sort(key=rep_key)
    basis: dict[int, tuple[int, frozenset]] = {}  # leading bit -> (cls, refs)
    observables = []
    for cls, refs in nontrivial:
        c, r = cls, refs
        while c:
            hb = 1 << (c.bit_length() - 1)
            if hb not in basis:
                basis[hb] = (c, r)
                observables.append((len(observables), sorted(r)))
                break
            bc, br = basis[hb]
            c ^= bc
            r = r ^ br
        else:
            if r:
                trivial.append(r)
    return trivial, observables


def _split_by_declared(schedule, lattice, relations) -> tuple[list, list]:
    obs_sets = []
    for spec in lattice.observable_specs:
        if spec.final_basis != schedule.final_basis:
            continue
        verts = set()
        for e in spec.path_edges:
            u, v, _ = lattice.edges[e]
            verts.update((u, v))
        obs_sets.append(frozenset(("final", q) for q in verts))
    detectors = []
    for refs in relations:
        r = refs
        for o in obs_sets:
            if len(r ^ o) < len(r):
                r = r ^ o
        if r and r not in obs_sets:
            detectors.append(r)
    observables = [(k, sorted(o)) for k, o in enumerate(obs_sets)]
    return detectors, observables
