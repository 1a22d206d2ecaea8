"""Compilation of schedules onto networks: concrete noisy circuits.

The compiler turns (schedule, layout, noise, timing) into a
:class:`CircuitProgram`:

* local checks run ancilla- or MPP-style with local depolarizing noise;
* checks spanning clusters consume Bell pairs (ideal preparation followed
  by two-qubit depolarizing noise at the nonlocal rate), assembled into
  GHZ states by star fusion when more than two clusters participate;
* Bell generation is batched under the per-cluster QPI limit, each batch
  costing tau_bell; every local operation costs tau_gate;
* per round, each qubit's idle time is charged as one depolarizing channel
  of probability 1 - (1-p_l)^t at the round end.

Whole-node failure attaches as tagged CORRELATED_ERROR channels; scheduled
swap-out inserts a transversal teleportation block and relabels the target
node's qubits onto a spare.  Monolithic compilation places everything on
one device with purely local noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitProgram, Instruction, PauliTerm, RecordRef
from .codes import ScheduleTemplate, measurement_plan
from .partition import NetworkLayout, Partition
from . import sim as _sim

__all__ = [
    "NoiseParams",
    "TimingModel",
    "CompiledExperiment",
    "compile_memory",
    "compile_swapout",
    "compile_monolithic",
    "compile_monolithic_ensemble",
    "attach_node_dropout",
    "monolithic_layout",
]


@dataclass(frozen=True)
class NoiseParams:
    """Physical rates: local p, nonlocal Bell rate p_nl = ratio * p, and
    the per-node per-round failure probability."""

    p: float = 0.0
    p_nl_ratio: float = 10.0
    p_dropout: float = 0.0
    e: int = 512

    @property
    def p_l(self) -> float:
        return self.p

    @property
    def p_nl(self) -> float:
        return min(1.0, self.p_nl_ratio * self.p)

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.p_dropout <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.e < 1:
            raise ValueError("Pauli sample count e must be >= 1")


@dataclass(frozen=True)
class TimingModel:
    tau_gate: int = 1
    tau_bell: int = 5

    def __post_init__(self):
        if self.tau_gate < 1 or self.tau_bell < 1:
            raise ValueError("durations must be positive integers")


@dataclass
class CompiledExperiment:
    program: CircuitProgram
    schedule: ScheduleTemplate
    layout: NetworkLayout | None
    noise: NoiseParams
    timing: TimingModel
    rounds: int                 # noisy rounds
    pad: int                    # noiseless rounds at each end
    seed: int
    k: int                      # compiled observable count
    round_ends: list            # instruction index just past each noisy round
    metadata: dict = field(default_factory=dict)

    @property
    def dropout_channel_indices(self) -> list:
        return [i for i, t in self.program.tags.items() if "dropout" in t]

    def validate_noiseless(self, shots: int = 2, seed: int = 99) -> None:
        _sim.assert_noiseless_deterministic(self.program, shots=shots, seed=seed)


# -- emission core -----------------------------------------------------------------


class _Emitter:
    def __init__(self, p_l: float, p_nl: float):
        self.instructions: list[Instruction] = []
        self.tags: dict[int, frozenset] = {}
        self.p_l = p_l
        self.p_nl = p_nl
        self.n_meas = 0
        self.qubit_map: dict[int, int] = {}
        self.timeline: dict[int, int] = {}
        self.busy: dict[int, int] = {}
        self.bell_batches = 0
        self.max_live_halves = 0

    def q(self, qubit: int) -> int:
        return self.qubit_map.get(qubit, qubit)

    def emit(self, opcode: str, targets=(), params=(), tag=None) -> int:
        idx = len(self.instructions)
        instr = Instruction(opcode, tuple(targets), tuple(params))
        self.instructions.append(instr)
        if tag:
            self.tags[idx] = frozenset(tag)
        self.n_meas += instr.num_measurements()
        return idx

    def _advance(self, qubits) -> None:
        t = max((self.timeline.get(q, 0) for q in qubits), default=0) + 1
        for q in qubits:
            self.timeline[q] = t
            self.busy[q] = self.busy.get(q, 0) + 1

    def gate1(self, op: str, qubit: int, noisy: bool = True) -> None:
        q = self.q(qubit)
        self.emit(op, (q,))
        self._advance((q,))
        if noisy and self.p_l > 0:
            self.emit("DEPOLARIZE1", (q,), (self.p_l,))

    def gate2(self, op: str, a: int, b: int, noisy: bool = True) -> None:
        qa, qb = self.q(a), self.q(b)
        self.emit(op, (qa, qb))
        self._advance((qa, qb))
        if noisy and self.p_l > 0:
            self.emit("DEPOLARIZE2", (qa, qb), (self.p_l,))

    def reset(self, basis: str, qubit: int, noisy: bool = True) -> None:
        q = self.q(qubit)
        self.emit("RZ" if basis == "Z" else "RX", (q,))
        self._advance((q,))
        if noisy and self.p_l > 0:
            self.emit("DEPOLARIZE1", (q,), (self.p_l,))

    def measure(self, op: str, qubit: int, noisy: bool = True) -> int:
        """Measurement preceded by depolarizing noise; returns record index."""
        q = self.q(qubit)
        if noisy and self.p_l > 0:
            self.emit("DEPOLARIZE1", (q,), (self.p_l,))
        rec = self.n_meas
        self.emit(op, (q,))
        self._advance((q,))
        return rec

    def measure_pair(self, term_a, term_b, noisy: bool = True) -> int:
        qa, qb = self.q(term_a[0]), self.q(term_b[0])
        if noisy and self.p_l > 0:
            self.emit("DEPOLARIZE2", (qa, qb), (self.p_l,))
        rec = self.n_meas
        self.emit("MPP", (PauliTerm(qa, term_a[1]), PauliTerm(qb, term_b[1])))
        self._advance((qa, qb))
        return rec

    def bell_pair(self, a: int, b: int, tau_bell: int) -> None:
        """Ideal Bell preparation followed by the nonlocal channel; both
        halves are busy for the batch's tau_bell."""
        qa, qb = self.q(a), self.q(b)
        self.emit("RZ", (qa, qb))
        self.emit("H", (qa,))
        self.emit("CX", (qa, qb))
        if self.p_nl > 0:
            self.emit("DEPOLARIZE2", (qa, qb), (self.p_nl,), tag=("nonlocal",))
        for q in (qa, qb):
            self.busy[q] = self.busy.get(q, 0) + tau_bell

    def cond(self, op: str, rec_index: int, qubit: int) -> None:
        self.emit(op, (RecordRef(rec_index - self.n_meas), self.q(qubit)))

    def controlled_pauli(self, control: int, target: int, axis: str) -> None:
        if axis == "X":
            self.gate2("CX", control, target)
        elif axis == "Z":
            self.gate2("CZ", control, target)
        else:  # conjugate the target so CX acts as controlled-Y
            self.gate1("SDAG", target)
            self.gate2("CX", control, target)
            self.gate1("S", target)

    def start_round(self) -> None:
        self.timeline = {}
        self.busy = {}
        self.bell_batches = 0

    def finish_round(self, timing: TimingModel, live_qubits,
                     noisy: bool) -> int:
        """Charge idling and return the round duration in time steps.

        Entanglement generation runs on the QPI hardware concurrently with
        local gate execution, so the round lasts as long as the slower of
        the two resource lines.  Idle time is everything a qubit is not
        busy; comm qubits occupied for the full Bell phase clamp at zero.
        """
        depth = max(self.timeline.values(), default=0)
        duration = max(self.bell_batches * timing.tau_bell,
                       depth * timing.tau_gate)
        if noisy and self.p_l > 0 and duration > 0:
            by_idle: dict[int, list] = {}
            for qubit in live_qubits:
                q = self.q(qubit)
                t = duration - self.busy.get(q, 0)
                if t > 0:
                    by_idle.setdefault(t, []).append(q)
            for t, qs in sorted(by_idle.items()):
                p_idle = 1.0 - (1.0 - self.p_l) ** t
                self.emit("DEPOLARIZE1", tuple(sorted(set(qs))), (p_idle,),
                          tag=("idle",))
        return duration


# -- nonlocal check plumbing -----------------------------------------------------------


def _stage_groups(schedule: ScheduleTemplate, sub_round: int) -> list:
    """X-type stabilizer circuits run before Z-type within a round so their
    gate layers never interleave on shared data qubits."""
    cids = schedule.sub_rounds[sub_round % schedule.period]
    if schedule.kind != "stabilizer":
        return [list(cids)]
    order = {"X": 0, "M": 1, "Z": 2}
    groups: dict[int, list] = {}
    for cid in cids:
        groups.setdefault(order[schedule.checks[cid].basis], []).append(cid)
    return [groups[key] for key in sorted(groups)]


def _check_need(root, leaves) -> dict:
    need = {root: len(leaves)}
    for leaf in leaves:
        need[leaf] = need.get(leaf, 0) + 1
    return need


def _schedule_waves(stage_specs: list, qpi: int) -> tuple[list, int]:
    """Assign nonlocal checks to Bell-generation waves.

    stage_specs: per stage, a list of (cid, root, leaves).  A check's pairs
    are co-batched so its fusion runs in one piece.  Stage-0 checks consume
    their halves between waves; with exactly two stages, later-stage checks
    may generate early in leftover capacity, holding their comm slots until
    their stage runs (their usage is charged through every remaining
    stage-0 wave).

    Returns (waves, w0) where waves is a list of [(stage, cid, root,
    leaves)] and waves[:w0] are emitted interleaved with stage-0
    consumption."""
    waves: list = []
    usage: list = []

    def fits(bi, need):
        return all(usage[bi].get(c, 0) + n <= qpi for c, n in need.items())

    def charge(bi, need):
        for c, n in need.items():
            usage[bi][c] = usage[bi].get(c, 0) + n

    for cid, root, leaves in stage_specs[0] if stage_specs else []:
        need = _check_need(root, leaves)
        if any(n > qpi for n in need.values()):
            raise ValueError(f"check {cid} needs {max(need.values())} comm "
                             f"qubits on one node, only {qpi} QPIs")
        for bi in range(len(waves)):
            if fits(bi, need):
                waves[bi].append((0, cid, root, leaves))
                charge(bi, need)
                break
        else:
            waves.append([(0, cid, root, leaves)])
            usage.append(dict(need))
    w0 = len(waves)

    later = [(s, spec) for s in range(1, len(stage_specs))
             for spec in stage_specs[s]]
    parkable = len(stage_specs) == 2
    for s, (cid, root, leaves) in later:
        need = _check_need(root, leaves)
        if any(n > qpi for n in need.values()):
            raise ValueError(f"check {cid} needs {max(need.values())} comm "
                             f"qubits on one node, only {qpi} QPIs")
        placed = False
        if parkable:
            # hold slots from the generating wave through every remaining
            # stage-0 wave
            for bi in range(w0):
                if all(fits(v, need) for v in range(bi, w0)):
                    waves[bi].append((s, cid, root, leaves))
                    for v in range(bi, w0):
                        charge(v, need)
                    placed = True
                    break
        if not placed:
            # dedicated later waves stay stage-homogeneous so each is
            # prepared and consumed at exactly one stage
            for bi in range(w0, len(waves)):
                if waves[bi][0][0] == s and fits(bi, need):
                    waves[bi].append((s, cid, root, leaves))
                    charge(bi, need)
                    placed = True
                    break
        if not placed:
            waves.append([(s, cid, root, leaves)])
            usage.append(dict(need))
    return waves, w0


class _SlotPool:
    """Deterministic per-cluster comm-qubit allocator with lifetimes."""

    def __init__(self, layout: NetworkLayout):
        self.free = {c: sorted(qs) for c, qs in layout.comm_qubits.items()}
        self.peak = 0
        self.qpi = layout.qpi_count

    def take(self, cluster: int) -> int:
        if not self.free[cluster]:
            raise RuntimeError(f"cluster {cluster} out of comm qubits")
        q = self.free[cluster].pop(0)
        used = self.qpi - len(self.free[cluster])
        self.peak = max(self.peak, used)
        return q

    def release(self, cluster: int, q: int) -> None:
        self.free[cluster].append(q)
        self.free[cluster].sort()


class _RoundCompiler:
    """Emits one code round at a time against a fixed layout."""

    def __init__(self, em: _Emitter, schedule: ScheduleTemplate,
                 layout: NetworkLayout | None, timing: TimingModel):
        self.em = em
        self.schedule = schedule
        self.layout = layout
        self.timing = timing
        self.outcome_records: dict = {}

    def run_round(self, round_index: int, live_qubits) -> int:
        em = self.em
        sched = self.schedule
        em.start_round()
        pending_readout: list = []  # (check_id, ancilla) measured at round end
        for t in range(sched.period):
            self._emit_sub_round(round_index, t, pending_readout)
        for cid, anc in pending_readout:
            rec = em.measure("MX", anc)
            self.outcome_records[(round_index, cid)] = [rec]
        return em.finish_round(self.timing, live_qubits, noisy=em.p_l > 0 or em.p_nl > 0)

    def _emit_sub_round(self, round_index: int, t: int,
                        pending_readout: list) -> None:
        em = self.em
        sched = self.schedule
        layout = self.layout
        stages = _stage_groups(sched, t)
        stage_specs: list = []
        stage_local: list = []
        for stage in stages:
            specs, local = [], []
            for cid in stage:
                if layout is not None and cid in layout.nonlocal_checks:
                    info = layout.nonlocal_checks[cid]
                    specs.append((cid, info.root,
                                  [c for c in info.clusters if c != info.root]))
                else:
                    local.append(cid)
            stage_specs.append(specs)
            stage_local.append(local)

        waves: list = []
        w0 = 0
        if any(stage_specs):
            waves, w0 = _schedule_waves(stage_specs, layout.qpi_count)
        pool = _SlotPool(layout) if layout is not None else None
        prepped: dict = {}

        def prep_wave(wave) -> None:
            em.bell_batches += 1
            for s, cid, root, leaves in wave:
                root_halves = [pool.take(root) for _ in leaves]
                leaf_legs = [pool.take(leaf) for leaf in leaves]
                for h, leg in zip(root_halves, leaf_legs):
                    em.bell_pair(h, leg, self.timing.tau_bell)
                prepped[cid] = (root, leaves, root_halves, leaf_legs)

        def consume(s, cid) -> None:
            root, leaves, root_halves, leaf_legs = prepped.pop(cid)
            recs = self._emit_ghz_check(cid, root, leaves, root_halves,
                                        leaf_legs)
            self.outcome_records[(round_index, cid)] = recs
            for h in root_halves:
                pool.release(root, h)
            for leaf, leg in zip(leaves, leaf_legs):
                pool.release(leaf, leg)

        for s_idx in range(len(stages)):
            if s_idx == 0:
                for wave in waves[:w0]:
                    prep_wave(wave)
                    for s, cid, *_ in wave:
                        if s == 0:
                            consume(0, cid)
            else:
                # consume parked members, then any dedicated later waves
                for wave in waves[:w0]:
                    for s, cid, *_ in wave:
                        if s == s_idx:
                            consume(s_idx, cid)
                for wave in waves[w0:]:
                    if wave and wave[0][0] == s_idx:
                        prep_wave(wave)
                        for s, cid, *_ in wave:
                            consume(s_idx, cid)
            for cid in stage_local[s_idx]:
                ch = sched.checks[cid]
                if ch.ancilla is None:
                    rec = em.measure_pair(ch.terms[0], ch.terms[1])
                    self.outcome_records[(round_index, cid)] = [rec]
                else:
                    em.reset("X", ch.ancilla)
                    for q, ax in ch.terms:
                        em.controlled_pauli(ch.ancilla, q, ax)
                    pending_readout.append((cid, ch.ancilla))
        if pool is not None:
            em.max_live_halves = max(em.max_live_halves, pool.peak)

    def _emit_ghz_check(self, cid: int, root: int, leaves: list,
                        root_halves: list, leaf_legs: list) -> list:
        """Fuse the root's Bell halves into a cat state spanning the
        participating clusters, drive the data terms, and read the cat out
        transversally in X.  Returns the readout record indices."""
        em = self.em
        sched = self.schedule
        part = self.layout.partition
        ch = sched.checks[cid]
        g_root = root_halves[0]
        for j in range(1, len(root_halves)):
            em.gate2("CX", g_root, root_halves[j])
            rec = em.measure("M", root_halves[j])
            em.cond("COND_X", rec, leaf_legs[j])
        legs = {root: g_root}
        for leaf, leg in zip(leaves, leaf_legs):
            legs[leaf] = leg
        by_cluster: dict[int, list] = {}
        for q, ax in ch.terms:
            by_cluster.setdefault(part.cluster_of[q], []).append((q, ax))
        if ch.ancilla is not None:
            # the explicit ancilla is bypassed: the cat state replaces it
            pass
        for cluster, terms in by_cluster.items():
            leg = legs[cluster]
            for q, ax in terms:
                em.controlled_pauli(leg, q, ax)
        return [em.measure("MX", leg) for _, leg in sorted(legs.items())]


# -- top-level compilers -----------------------------------------------------------------


def monolithic_layout(schedule: ScheduleTemplate) -> None:
    """Monolithic compilation carries no layout: everything is local."""
    return None


def _live_qubits(schedule: ScheduleTemplate, layout: NetworkLayout | None,
                 extra=()) -> list:
    qs = list(range(schedule.n_qubits))
    if layout is not None:
        for comm in layout.comm_qubits.values():
            qs.extend(comm)
    qs.extend(extra)
    return qs


def _total_qubits(schedule: ScheduleTemplate,
                  layout: NetworkLayout | None) -> int:
    n = schedule.n_qubits
    if layout is not None:
        n += sum(len(c) for c in layout.comm_qubits.values())
    return n


def _finalize(em: _Emitter, schedule: ScheduleTemplate, plan,
              rc: _RoundCompiler, final_records: dict,
              n_qubits: int) -> tuple[CircuitProgram, int]:
    """Emit DETECTOR/OBSERVABLE lines from the measurement plan."""
    cpr = sum(len(schedule.sub_rounds[t]) for t in range(schedule.period))
    order = [cid for t in range(schedule.period) for cid in schedule.sub_rounds[t]]

    def resolve(ref) -> list:
        if ref[0] == "final":
            return [final_records[ref[1]]]
        ordinal = ref[1]
        r, cid = ordinal // cpr, order[ordinal % cpr]
        return rc.outcome_records[(r, cid)]

    def parity_records(refs) -> list:
        acc: set = set()
        for ref in refs:
            acc ^= set(resolve(ref))
        return sorted(acc)

    for refs in plan.detectors:
        recs = parity_records(refs)
        em.emit("DETECTOR", tuple(RecordRef(r - em.n_meas) for r in recs))
    k = 0
    for obs_index, refs in plan.observables:
        recs = parity_records(refs)
        em.emit("OBSERVABLE", tuple(RecordRef(r - em.n_meas) for r in recs),
                (float(obs_index),))
        k += 1
    prog = CircuitProgram(n_qubits, em.instructions, em.tags)
    return prog, k


def _final_readout(em: _Emitter, schedule: ScheduleTemplate, basis: str) -> dict:
    """Noiseless transversal data readout; returns qubit -> record index."""
    final_records = {}
    for q in range(schedule.n_data):
        if basis == "X":
            em.gate1("H", q, noisy=False)
        elif basis == "Y":
            em.gate1("SDAG", q, noisy=False)
            em.gate1("H", q, noisy=False)
        final_records[q] = em.measure("M", q, noisy=False)
    return final_records


def compile_memory(schedule: ScheduleTemplate, layout: NetworkLayout | None,
                   noise: NoiseParams, timing: TimingModel = TimingModel(),
                   rounds: int = 32, pad: int = 2, seed: int = 0,
                   validate: bool = False) -> CompiledExperiment:
    """A memory experiment: pad noiseless rounds, ``rounds`` noisy rounds,
    pad noiseless rounds, then a noiseless transversal readout."""
    if rounds < 1:
        raise ValueError("need at least one noisy round")
    if layout is not None and set(layout.partition.cluster_of) != \
            set(range(schedule.n_qubits)):
        raise ValueError("layout does not cover the schedule's qubits")
    total_rounds = rounds + 2 * pad
    plan = measurement_plan(schedule, total_rounds)
    em = _Emitter(noise.p_l, noise.p_nl)
    rc = _RoundCompiler(em, schedule, layout, timing)
    live = _live_qubits(schedule, layout)
    n_qubits = _total_qubits(schedule, layout)

    em.emit("RZ", tuple(range(n_qubits)))
    round_ends = []
    durations = []
    for r in range(total_rounds):
        noisy = pad <= r < pad + rounds
        em.p_l = noise.p_l if noisy else 0.0
        em.p_nl = noise.p_nl if noisy else 0.0
        durations.append(rc.run_round(r, live))
        if noisy:
            round_ends.append(len(em.instructions))
        em.emit("TICK")
    em.p_l = 0.0
    em.p_nl = 0.0
    final_records = _final_readout(em, schedule, plan.final_basis)
    prog, k = _finalize(em, schedule, plan, rc, final_records, n_qubits)
    exp = CompiledExperiment(
        prog, schedule, layout, noise, timing, rounds, pad, seed, k,
        round_ends,
        metadata={"mode": "memory", "durations": durations,
                  "max_live_halves": em.max_live_halves},
    )
    if validate:
        exp.validate_noiseless()
    return exp


def compile_monolithic(schedule: ScheduleTemplate, noise: NoiseParams,
                       timing: TimingModel = TimingModel(), rounds: int = 32,
                       pad: int = 2, seed: int = 0,
                       failure_round: int | None = None,
                       validate: bool = False) -> CompiledExperiment:
    """All-local compilation; optionally one whole-device failure after the
    given noisy round (1-based), as fully depolarizing single-qubit noise
    on every qubit, tagged "dropout"."""
    if failure_round is not None and not (1 <= failure_round <= rounds):
        raise ValueError(f"failure_round {failure_round} outside [1, {rounds}]")
    exp = compile_memory(schedule, None, noise, timing, rounds, pad, seed,
                         validate=False)
    exp.metadata["mode"] = "monolithic"
    if failure_round is not None:
        at = exp.round_ends[failure_round - 1]
        channels = []
        for q in range(schedule.n_qubits):
            # three half-probability correlated flips compose to the
            # uniform single-qubit depolarizing channel (I/X/Y/Z each 1/4)
            for ax in "XYZ":
                channels.append(Instruction("CORRELATED_ERROR",
                                            (PauliTerm(q, ax),), (0.5,)))
        exp = _insert_channels(exp, [(failure_round - 1, channels)],
                               tag=("dropout", f"round={failure_round - 1}"))
        exp.metadata["failure_round"] = failure_round
    if validate:
        exp.validate_noiseless()
    return exp


def compile_monolithic_ensemble(schedule: ScheduleTemplate, noise: NoiseParams,
                                timing: TimingModel = TimingModel(),
                                rounds: int = 32, pad: int = 2,
                                seed: int = 0) -> list:
    """Ensemble of (weight, experiment): the no-failure circuit plus one
    single-failure circuit per round.  Weights are the exactly-zero and
    exactly-one failure probabilities; the residual multi-failure weight
    1 - (1-p)^r - r p (1-p)^(r-1) is left unsimulated and reported by the
    combiner."""
    p_d = noise.p_dropout
    members = [((1.0 - p_d) ** rounds,
                compile_monolithic(schedule, noise, timing, rounds, pad, seed))]
    w_fail = p_d * (1.0 - p_d) ** (rounds - 1)
    for r in range(1, rounds + 1):
        members.append((w_fail,
                        compile_monolithic(schedule, noise, timing, rounds,
                                           pad, seed, failure_round=r)))
    return members


# -- node dropout ----------------------------------------------------------------------


def attach_node_dropout(exp: CompiledExperiment, layout: NetworkLayout,
                        noise: NoiseParams, seed: int = 0) -> CompiledExperiment:
    """Sampled-Pauli whole-node failure: per (cluster, noisy round), e
    CORRELATED_ERROR(p_dropout / e) channels on uniformly random
    non-identity Paulis over the cluster's data+ancilla qubits, appended at
    the round end and tagged "dropout"."""
    if noise.p_dropout < 0 or noise.p_dropout > 1:
        raise ValueError("p_dropout outside [0, 1]")
    if noise.p_dropout == 0.0:
        return exp
    p_eff = noise.p_dropout / noise.e
    rng = np.random.Generator(np.random.Philox(key=[seed, 0xD0]))
    # after a swap-out the target node's role moves to the spare's qubits
    swap_round = exp.metadata.get("swap_after_round")
    swap_target = exp.metadata.get("target")
    spare_map = exp.metadata.get("spare_map", {})
    inserts = []
    for r in range(exp.rounds):
        for ci, cluster in enumerate(layout.partition.clusters):
            qs = sorted(cluster)
            if (swap_round is not None and ci == swap_target
                    and r >= swap_round):
                qs = sorted(spare_map.get(q, q) for q in qs)
            channels = []
            for _ in range(noise.e):
                while True:
                    paulis = rng.integers(0, 4, size=len(qs))
                    if paulis.any():
                        break
                terms = tuple(PauliTerm(int(q), "IXYZ"[p])
                              for q, p in zip(qs, paulis) if p)
                channels.append(Instruction("CORRELATED_ERROR", terms, (p_eff,)))
            inserts.append((r, channels, ("dropout", f"round={r}",
                                          f"cluster={ci}")))
    return _insert_channels_tagged(exp, inserts)


def _insert_channels(exp: CompiledExperiment, inserts, tag) -> CompiledExperiment:
    return _insert_channels_tagged(exp, [(r, chans, tag) for r, chans in inserts])


def _insert_channels_tagged(exp: CompiledExperiment, inserts) -> CompiledExperiment:
    """Rebuild the program with channel lists appended at noisy-round ends.

    inserts: [(noisy_round_index, [Instruction...], tag)] in round order.
    """
    old = exp.program
    by_round: dict[int, list] = {}
    for r, channels, tag in inserts:
        by_round.setdefault(r, []).append((channels, tag))
    new_instrs: list[Instruction] = []
    new_tags: dict[int, frozenset] = {}
    new_round_ends = []
    pos = 0
    for r, end in enumerate(exp.round_ends):
        while pos < end:
            if pos in old.tags:
                new_tags[len(new_instrs)] = old.tags[pos]
            new_instrs.append(old.instructions[pos])
            pos += 1
        for channels, tag in by_round.get(r, ()):
            for instr in channels:
                new_tags[len(new_instrs)] = frozenset(tag)
                new_instrs.append(instr)
        new_round_ends.append(len(new_instrs))
    while pos < len(old.instructions):
        if pos in old.tags:
            new_tags[len(new_instrs)] = old.tags[pos]
        new_instrs.append(old.instructions[pos])
        pos += 1
    prog = CircuitProgram(old.qubit_count, new_instrs, new_tags)
    return CompiledExperiment(
        prog, exp.schedule, exp.layout, exp.noise, exp.timing, exp.rounds,
        exp.pad, exp.seed, exp.k, new_round_ends, dict(exp.metadata),
    )


# -- scheduled swap-out ------------------------------------------------------------------


def compile_swapout(schedule: ScheduleTemplate, layout: NetworkLayout,
                    noise: NoiseParams, timing: TimingModel = TimingModel(),
                    rounds: int = 32, pad: int = 2,
                    swap_after_round: int = 16, target: int | None = None,
                    seed: int = 0, validate: bool = False) -> CompiledExperiment:
    """Memory experiment with one scheduled node swap-out.

    After noisy round ``swap_after_round`` (1-based), every data and
    ancilla qubit on the target node is teleported onto a fresh spare node
    (same size, same QPI count) through noisy Bell pairs, batched under the
    QPI limit; subsequent rounds address the spare's qubits.
    """
    if not (1 <= swap_after_round <= rounds):
        raise ValueError("swap_after_round outside the noisy window")
    if layout is None:
        raise ValueError("swap-out requires a distributed layout")
    from .partition import select_largest_node
    if target is None:
        target = select_largest_node(layout.partition, schedule)
    if not (0 <= target < layout.n_clusters):
        raise ValueError(f"invalid target cluster {target}")

    total_rounds = rounds + 2 * pad
    plan = measurement_plan(schedule, total_rounds)
    n_base = _total_qubits(schedule, layout)
    moved = sorted(layout.partition.clusters[target])
    spare_map = {q: n_base + i for i, q in enumerate(moved)}
    spare_comm = [n_base + len(moved) + i for i in range(layout.qpi_count)]
    n_qubits = n_base + len(moved) + layout.qpi_count

    em = _Emitter(noise.p_l, noise.p_nl)
    rc = _RoundCompiler(em, schedule, layout, timing)
    live_pre = _live_qubits(schedule, layout)
    live_post = live_pre + list(spare_map.values()) + spare_comm

    em.emit("RZ", tuple(range(n_qubits)))
    round_ends = []
    durations = []
    swap_global = pad + swap_after_round  # first round index after the block
    for r in range(total_rounds):
        if r == swap_global:
            _emit_teleport_block(em, layout, timing, moved, spare_map,
                                 spare_comm, live_pre, noise)
            # relabel: the spare takes over the target's identity
            em.qubit_map.update(spare_map)
            for slot, new in zip(layout.comm_qubits[target], spare_comm):
                em.qubit_map[slot] = new
        noisy = pad <= r < pad + rounds
        em.p_l = noise.p_l if noisy else 0.0
        em.p_nl = noise.p_nl if noisy else 0.0
        durations.append(rc.run_round(
            r, live_post if r >= swap_global else live_pre))
        if noisy:
            round_ends.append(len(em.instructions))
        em.emit("TICK")
    em.p_l = 0.0
    em.p_nl = 0.0
    final_records = _final_readout(em, schedule, plan.final_basis)
    prog, k = _finalize(em, schedule, plan, rc, final_records, n_qubits)
    exp = CompiledExperiment(
        prog, schedule, layout, noise, timing, rounds, pad, seed, k,
        round_ends,
        metadata={"mode": "swapout", "durations": durations,
                  "swap_after_round": swap_after_round, "target": target,
                  "spare_map": dict(spare_map),
                  "teleport_batches": math.ceil(len(moved) / layout.qpi_count),
                  "max_live_halves": em.max_live_halves},
    )
    if validate:
        exp.validate_noiseless()
    return exp


def _emit_teleport_block(em: _Emitter, layout: NetworkLayout,
                         timing: TimingModel, moved, spare_map, spare_comm,
                         live, noise: NoiseParams) -> None:
    """One transversal teleportation step between two code rounds."""
    em.start_round()
    qpi = layout.qpi_count
    target_comm = layout.comm_qubits[layout.partition.cluster_of[moved[0]]]
    # the block runs between rounds; only noisy if the experiment is noisy
    noisy = em.p_l > 0 or em.p_nl > 0
    for start in range(0, len(moved), qpi):
        batch = moved[start:start + qpi]
        em.bell_batches += 1
        for slot, q in enumerate(batch):
            dest = spare_map[q]
            half = target_comm[slot]
            em.bell_pair(half, dest, timing.tau_bell)
        for slot, q in enumerate(batch):
            dest = spare_map[q]
            half = target_comm[slot]
            em.gate2("CX", q, half)
            em.gate1("H", q)
            rec_x = em.measure("M", half)
            rec_z = em.measure("M", q)
            em.cond("COND_X", rec_x, dest)
            em.cond("COND_Z", rec_z, dest)
    em.finish_round(timing, live + list(spare_map.values()), noisy=noisy)
