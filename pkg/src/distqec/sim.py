"""Samplers for compiled circuits.

Three engines share one instruction-walking core:

* :class:`FrameSampler` / :func:`sample_frames` — Pauli-frame Monte Carlo,
  vectorized across shots.  Valid because compiled circuits have
  deterministic all-zero detectors in their noiseless reference; only
  error-induced flips are tracked.
* :func:`oracle_sample` — full stabilizer-tableau simulation with true
  measurement collapse, shot by shot.  Slow, exact, used as the
  verification oracle and for noiseless determinism checks.
* :func:`propagate_pauli` / :class:`ColumnPropagator` — deterministic
  propagation of single error alternatives; each "column" carries one
  injected Pauli, which yields its detector/observable symptom.  This is
  the engine behind detector error model construction.

Both samplers draw channel firings with identical alternative encodings,
and both accept externally supplied firing patterns, so their outputs can
be compared bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import CircuitProgram, Instruction, PauliTerm, RecordRef
from .tableau import PauliVec, StabilizerTableau

__all__ = [
    "ShotOutcomes",
    "FrameSampler",
    "sample_frames",
    "sample_error_pattern",
    "oracle_sample",
    "propagate_pauli",
    "ColumnPropagator",
    "channel_alternatives",
    "write_outcomes",
    "read_outcomes",
    "strip_noise",
    "assert_noiseless_deterministic",
]


# -- channel alternative encoding ---------------------------------------------
#
# DEPOLARIZE1 on qubit q: alternatives 0,1,2 = X,Y,Z.
# DEPOLARIZE2 on (a, b):  alternatives 0..14; k -> (pa, pb) = divmod(k+1, 4)
#                         with 0=I, 1=X, 2=Y, 3=Z per qubit.
# CORRELATED_ERROR:       single alternative 0 = the whole Pauli product.
#
# A multi-target DEPOLARIZE instruction is a list of independent
# sub-channels, one per qubit (or per pair).

_D2_FLIPS = np.zeros((15, 4), dtype=bool)  # fxa, fza, fxb, fzb
for _k in range(15):
    _pa, _pb = divmod(_k + 1, 4)
    _D2_FLIPS[_k] = (_pa in (1, 2), _pa in (2, 3), _pb in (1, 2), _pb in (2, 3))

_D1_FLIPS = np.zeros((3, 2), dtype=bool)  # fx, fz
for _k in range(3):
    _D1_FLIPS[_k] = (_k < 2, _k > 0)


def channel_alternatives(instr: Instruction) -> list[tuple[tuple[PauliTerm, ...], float]]:
    """All (pauli_terms, probability) alternatives of a noise instruction,
    flattened over its sub-channels, in canonical order."""
    out = []
    if instr.opcode == "DEPOLARIZE1":
        p = instr.params[0]
        for q in instr.targets:
            for k, axis in enumerate("XYZ"):
                out.append(((PauliTerm(q, axis),), p / 3.0))
    elif instr.opcode == "DEPOLARIZE2":
        p = instr.params[0]
        qs = list(instr.targets)
        for a, b in zip(qs[::2], qs[1::2]):
            for k in range(15):
                pa, pb = divmod(k + 1, 4)
                terms = []
                if pa:
                    terms.append(PauliTerm(a, "IXYZ"[pa]))
                if pb:
                    terms.append(PauliTerm(b, "IXYZ"[pb]))
                out.append((tuple(terms), p / 15.0))
    elif instr.opcode == "CORRELATED_ERROR":
        out.append((tuple(t for t in instr.targets if isinstance(t, PauliTerm)),
                    instr.params[0]))
    else:
        raise ValueError(f"{instr.opcode} is not a noise channel")
    return out


def sub_channels(instr: Instruction) -> list[tuple[tuple[int, ...], int]]:
    """(qubits, n_alternatives) for each independent sub-channel."""
    if instr.opcode == "DEPOLARIZE1":
        return [((q,), 3) for q in instr.targets]
    if instr.opcode == "DEPOLARIZE2":
        qs = list(instr.targets)
        return [((a, b), 15) for a, b in zip(qs[::2], qs[1::2])]
    if instr.opcode == "CORRELATED_ERROR":
        return [(tuple(t.qubit for t in instr.targets), 1)]
    raise ValueError(f"{instr.opcode} is not a noise channel")


# -- outcomes -------------------------------------------------------------------


@dataclass
class ShotOutcomes:
    """Detector and observable bits, packed across shots (little-endian)."""

    shots: int
    detectors: np.ndarray    # (n_det, ceil(shots/8)) uint8
    observables: np.ndarray  # (k, ceil(shots/8)) uint8

    @property
    def num_detectors(self) -> int:
        return self.detectors.shape[0]

    @property
    def num_observables(self) -> int:
        return self.observables.shape[0]

    def detector_bits(self, lo: int = 0, hi: int | None = None) -> np.ndarray:
        """Unpacked bool array (n_det, hi-lo) for a shot range."""
        hi = self.shots if hi is None else hi
        full = np.unpackbits(self.detectors, axis=1, bitorder="little")
        return full[:, lo:hi].astype(bool)

    def observable_bits(self, lo: int = 0, hi: int | None = None) -> np.ndarray:
        hi = self.shots if hi is None else hi
        full = np.unpackbits(self.observables, axis=1, bitorder="little")
        return full[:, lo:hi].astype(bool)

    def any_detector_count(self) -> int:
        """Number of shots with at least one fired detector."""
        if self.detectors.shape[0] == 0:
            return 0
        merged = np.bitwise_or.reduce(self.detectors, axis=0)
        return int(np.unpackbits(merged, bitorder="little")[: self.shots].sum())

    def __eq__(self, other):
        if not isinstance(other, ShotOutcomes):
            return NotImplemented
        return (
            self.shots == other.shots
            and np.array_equal(self.detectors, other.detectors)
            and np.array_equal(self.observables, other.observables)
        )


def _pack_row(row: np.ndarray) -> np.ndarray:
    return np.packbits(row, bitorder="little")


# -- shared program walk ---------------------------------------------------------


class _Walker:
    """Instruction walk shared by the frame sampler and column propagator.

    State: per-qubit X/Z flip rows (width = shots or columns), packed
    measurement-flip records, and detector/observable accumulators.
    """

    def __init__(self, program: CircuitProgram, width: int):
        self.program = program
        self.width = width
        self.nbytes = (width + 7) // 8
        n = program.qubit_count
        self.fx = np.zeros((n, width), dtype=bool)
        self.fz = np.zeros((n, width), dtype=bool)
        self.meas = np.zeros((program.num_measurements, self.nbytes), dtype=np.uint8)
        self.det = np.zeros((program.num_detectors, self.nbytes), dtype=np.uint8)
        self.obs = np.zeros((program.num_observables, self.nbytes), dtype=np.uint8)
        self._m = 0
        self._d = 0
        self._offsets = program.measurement_offsets()

    # gate effects on frames -------------------------------------------------

    def _gate(self, instr: Instruction) -> None:
        op = instr.opcode
        fx, fz = self.fx, self.fz
        if op == "H":
            for q in instr.targets:
                fx[q], fz[q] = fz[q].copy(), fx[q].copy()
        elif op in ("S", "SDAG"):
            for q in instr.targets:
                fz[q] ^= fx[q]
        elif op in ("X", "Y", "Z"):
            pass  # Paulis commute with the frame up to phase
        elif op == "CX":
            ts = instr.targets
            for c, t in zip(ts[::2], ts[1::2]):
                fx[t] ^= fx[c]
                fz[c] ^= fz[t]
        elif op == "CZ":
            ts = instr.targets
            for a, b in zip(ts[::2], ts[1::2]):
                fz[a] ^= fx[b]
                fz[b] ^= fx[a]
        elif op in ("RZ", "RX"):
            for q in instr.targets:
                fx[q] = False
                fz[q] = False

    def _flip_row(self, q: int, axis: str) -> np.ndarray:
        if axis == "Z":
            return self.fx[q]
        if axis == "X":
            return self.fz[q]
        return self.fx[q] ^ self.fz[q]

    def _measure(self, instr: Instruction) -> None:
        if instr.opcode == "M":
            for q in instr.targets:
                self.meas[self._m] = _pack_row(self.fx[q])
                self._m += 1
        elif instr.opcode == "MX":
            for q in instr.targets:
                self.meas[self._m] = _pack_row(self.fz[q])
                self._m += 1
        else:  # MPP, weight-2 product
            a, b = instr.targets
            row = self._flip_row(a.qubit, a.axis) ^ self._flip_row(b.qubit, b.axis)
            self.meas[self._m] = _pack_row(row)
            self._m += 1

    def _cond(self, i: int, instr: Instruction) -> None:
        ref = next(t for t in instr.targets if isinstance(t, RecordRef))
        q = next(t for t in instr.targets if isinstance(t, int))
        idx = self._offsets[i] + ref.offset
        row = np.unpackbits(self.meas[idx], bitorder="little")[: self.width].astype(bool)
        if instr.opcode == "COND_X":
            self.fx[q] ^= row
        else:
            self.fz[q] ^= row

    def _annotate(self, i: int, instr: Instruction) -> None:
        idxs = [self._offsets[i] + t.offset for t in instr.targets]
        acc = np.bitwise_xor.reduce(self.meas[idxs], axis=0)
        if instr.opcode == "DETECTOR":
            self.det[self._d] = acc
            self._d += 1
        else:
            self.obs[int(instr.params[0])] ^= acc

    def run(self, channel_handler) -> ShotOutcomes:
        noise_ops = ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR")
        for i, instr in enumerate(self.program.instructions):
            op = instr.opcode
            if op in noise_ops:
                channel_handler(self, i, instr)
            elif op in ("M", "MX", "MPP"):
                self._measure(instr)
            elif op in ("COND_X", "COND_Z"):
                self._cond(i, instr)
            elif op in ("DETECTOR", "OBSERVABLE"):
                self._annotate(i, instr)
            elif op == "TICK":
                pass
            else:
                self._gate(instr)
        return ShotOutcomes(self.width, self.det, self.obs)


# -- frame sampler ---------------------------------------------------------------


def _bernoulli_indices(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Indices of successes of n Bernoulli(p) trials, via geometric gaps."""
    if p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n, dtype=np.int64)
    out = []
    pos = -1
    # draw in blocks until past the end
    block = max(16, int(n * p * 1.3) + 8)
    while pos < n:
        gaps = rng.geometric(p, size=block)
        pts = pos + np.cumsum(gaps)
        out.append(pts)
        pos = int(pts[-1])
    idx = np.concatenate(out)
    return idx[idx < n]


class FrameSampler:
    """Reusable Pauli-frame sampler for one program.

    Channel firings are drawn sparsely (geometric gap sampling) when the
    expected fire count is small, and as dense Bernoulli rows otherwise;
    both paths consume the same generator so results are reproducible for a
    fixed (seed, shots).
    """

    DENSE_THRESHOLD = 0.05

    def __init__(self, program: CircuitProgram):
        self.program = program
        if program.num_observables:
            idx = sorted({int(i.params[0]) for i in program.instructions
                          if i.opcode == "OBSERVABLE"})
            if idx != list(range(len(idx))):
                raise ValueError("observable indices must be contiguous from 0")

    def sample(self, shots: int, seed: int,
               pattern: dict | None = None) -> ShotOutcomes:
        if shots <= 0:
            raise ValueError("shots must be positive")
        rng = np.random.Generator(np.random.Philox(key=seed))
        walker = _Walker(self.program, shots)

        def handler(w: _Walker, i: int, instr: Instruction) -> None:
            if pattern is not None:
                _apply_pattern(w, i, instr, pattern)
                return
            p = instr.params[0]
            if p <= 0.0:
                return
            for s_idx, (qubits, n_alt) in enumerate(sub_channels(instr)):
                if p < self.DENSE_THRESHOLD:
                    idx = _bernoulli_indices(rng, shots, p)
                    if idx.size == 0:
                        continue
                    alts = rng.integers(0, n_alt, size=idx.size) if n_alt > 1 else \
                        np.zeros(idx.size, dtype=np.int64)
                    _scatter_apply(w, instr, qubits, idx, alts)
                else:
                    fire = rng.random(shots) < p
                    alts = rng.integers(0, n_alt, size=shots) if n_alt > 1 else \
                        np.zeros(shots, dtype=np.int64)
                    _dense_apply(w, instr, qubits, fire, alts)

        return walker.run(handler)


def _scatter_apply(w: _Walker, instr, qubits, idx, alts) -> None:
    op = instr.opcode
    if op == "DEPOLARIZE1":
        q = qubits[0]
        fxm = _D1_FLIPS[alts, 0]
        fzm = _D1_FLIPS[alts, 1]
        w.fx[q, idx[fxm]] ^= True
        w.fz[q, idx[fzm]] ^= True
    elif op == "DEPOLARIZE2":
        a, b = qubits
        fl = _D2_FLIPS[alts]
        w.fx[a, idx[fl[:, 0]]] ^= True
        w.fz[a, idx[fl[:, 1]]] ^= True
        w.fx[b, idx[fl[:, 2]]] ^= True
        w.fz[b, idx[fl[:, 3]]] ^= True
    else:  # CORRELATED_ERROR
        for t in instr.targets:
            if t.axis != "Z":
                w.fx[t.qubit, idx] ^= True
            if t.axis != "X":
                w.fz[t.qubit, idx] ^= True


def _dense_apply(w: _Walker, instr, qubits, fire, alts) -> None:
    op = instr.opcode
    if op == "DEPOLARIZE1":
        q = qubits[0]
        w.fx[q] ^= fire & _D1_FLIPS[alts, 0]
        w.fz[q] ^= fire & _D1_FLIPS[alts, 1]
    elif op == "DEPOLARIZE2":
        a, b = qubits
        fl = _D2_FLIPS[alts]
        w.fx[a] ^= fire & fl[:, 0]
        w.fz[a] ^= fire & fl[:, 1]
        w.fx[b] ^= fire & fl[:, 2]
        w.fz[b] ^= fire & fl[:, 3]
    else:
        for t in instr.targets:
            if t.axis != "Z":
                w.fx[t.qubit] ^= fire
            if t.axis != "X":
                w.fz[t.qubit] ^= fire


def _apply_pattern(w: _Walker, i: int, instr, pattern: dict) -> None:
    for s_idx, (qubits, n_alt) in enumerate(sub_channels(instr)):
        alt_row = pattern.get((i, s_idx))
        if alt_row is None:
            continue
        idx = np.flatnonzero(alt_row >= 0)
        if idx.size == 0:
            continue
        _scatter_apply(w, instr, qubits, idx, alt_row[idx])


def sample_frames(exp, shots: int, seed: int,
                  pattern: dict | None = None) -> ShotOutcomes:
    """Sample detector/observable outcomes with the Pauli-frame engine.

    ``exp`` may be a CircuitProgram or anything with a ``.program``
    attribute.  Deterministic given (exp, shots, seed).
    """
    program = getattr(exp, "program", exp)
    return FrameSampler(program).sample(shots, seed, pattern=pattern)


def sample_error_pattern(exp, shots: int, seed: int) -> dict:
    """Pre-sample channel firings: {(instr_index, sub_channel): int8 array}
    with -1 = no fire, else the alternative index.  Feeding the same
    pattern to both engines makes their outputs bit-identical."""
    program = getattr(exp, "program", exp)
    rng = np.random.Generator(np.random.Philox(key=seed))
    pattern: dict = {}
    for i, instr in enumerate(program.instructions):
        if instr.opcode not in ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR"):
            continue
        p = instr.params[0]
        for s_idx, (qubits, n_alt) in enumerate(sub_channels(instr)):
            fire = rng.random(shots) < p
            alts = rng.integers(0, n_alt, size=shots)
            row = np.where(fire, alts, -1).astype(np.int8)
            pattern[(i, s_idx)] = row
    return pattern


# -- stabilizer oracle ------------------------------------------------------------


def oracle_sample(exp, shots: int, seed: int, pattern: dict | None = None,
                  max_qubits: int = 1024) -> ShotOutcomes:
    """Tableau-oracle sampler: true collapse dynamics, one tableau per shot.

    Supports the same injected-pattern mechanism as the frame sampler.
    Performance degrades as O(n^2) per measurement; ``max_qubits`` is a
    guard, not a correctness bound.
    """
    program = getattr(exp, "program", exp)
    n = program.qubit_count
    if n > max_qubits:
        raise ValueError(f"oracle limited to {max_qubits} qubits, got {n}")
    if shots <= 0:
        raise ValueError("shots must be positive")
    nbytes = (shots + 7) // 8
    det = np.zeros((program.num_detectors, nbytes), dtype=np.uint8)
    obs = np.zeros((program.num_observables, nbytes), dtype=np.uint8)
    offsets = program.measurement_offsets()

    # precompile the instruction walk: Pauli vectors and resolved record
    # indices are shared across shots
    _GATES1 = {"H": "h", "S": "s", "SDAG": "sdag", "X": "x_gate",
               "Y": "y_gate", "Z": "z_gate"}
    ops: list[tuple] = []
    for i, instr in enumerate(program.instructions):
        op = instr.opcode
        if op in _GATES1:
            ops.append(("g1", _GATES1[op], instr.targets))
        elif op in ("CX", "CZ"):
            ts = instr.targets
            ops.append(("g2", op.lower(), tuple(zip(ts[::2], ts[1::2]))))
        elif op in ("RZ", "RX"):
            axis = "Z" if op == "RZ" else "X"
            flip = "x_gate" if op == "RZ" else "z_gate"
            vecs = [(PauliVec(n, [(q, axis)]), q) for q in instr.targets]
            ops.append(("reset", flip, vecs))
        elif op == "M":
            ops.append(("meas", [PauliVec(n, [(q, "Z")]) for q in instr.targets]))
        elif op == "MX":
            ops.append(("meas", [PauliVec(n, [(q, "X")]) for q in instr.targets]))
        elif op == "MPP":
            a, b = instr.targets
            ops.append(("meas", [PauliVec(n, [(a.qubit, a.axis),
                                              (b.qubit, b.axis)])]))
        elif op in ("COND_X", "COND_Z"):
            ref = next(t for t in instr.targets if isinstance(t, RecordRef))
            q = next(t for t in instr.targets if isinstance(t, int))
            ops.append(("cond", "x_gate" if op == "COND_X" else "z_gate",
                        offsets[i] + ref.offset, q))
        elif op == "DETECTOR":
            ops.append(("det", [offsets[i] + t.offset for t in instr.targets]))
        elif op == "OBSERVABLE":
            ops.append(("obs", int(instr.params[0]),
                        [offsets[i] + t.offset for t in instr.targets]))
        elif op == "TICK":
            continue
        else:  # noise channel
            subs = []
            for s_idx, (qubits, n_alt) in enumerate(sub_channels(instr)):
                alts = [PauliVec(n, _alt_terms(instr, qubits, a))
                        for a in range(n_alt)]
                subs.append((i, s_idx, n_alt, alts))
            ops.append(("noise", instr.params[0], subs))

    for shot in range(shots):
        rng = np.random.Generator(np.random.Philox(key=[seed, shot]))
        tab = StabilizerTableau(n, rng=rng)
        record: list[int] = []
        d_idx = 0
        for entry in ops:
            kind = entry[0]
            if kind == "g1":
                f = getattr(tab, entry[1])
                for q in entry[2]:
                    f(q)
            elif kind == "g2":
                f = getattr(tab, entry[1])
                for c, t in entry[2]:
                    f(c, t)
            elif kind == "meas":
                for vec in entry[1]:
                    out, _ = tab.measure(vec)
                    record.append(out)
            elif kind == "reset":
                flip = getattr(tab, entry[1])
                for vec, q in entry[2]:
                    out, _ = tab.measure(vec)
                    if out:
                        flip(q)
            elif kind == "cond":
                if record[entry[2]]:
                    getattr(tab, entry[1])(entry[3])
            elif kind == "det":
                par = 0
                for m in entry[1]:
                    par ^= record[m]
                if par:
                    det[d_idx, shot >> 3] ^= 1 << (shot & 7)
                d_idx += 1
            elif kind == "obs":
                par = 0
                for m in entry[2]:
                    par ^= record[m]
                if par:
                    obs[entry[1], shot >> 3] ^= 1 << (shot & 7)
            else:  # noise
                p = entry[1]
                for i, s_idx, n_alt, alts in entry[2]:
                    if pattern is not None:
                        row = pattern.get((i, s_idx))
                        alt = -1 if row is None else int(row[shot])
                    else:
                        alt = -1
                        if p > 0 and rng.random() < p:
                            alt = int(rng.integers(0, n_alt))
                    if alt >= 0:
                        tab.apply_pauli(alts[alt])
    return ShotOutcomes(shots, det, obs)


def _alt_terms(instr, qubits, alt: int) -> list[tuple[int, str]]:
    if instr.opcode == "DEPOLARIZE1":
        return [(qubits[0], "XYZ"[alt])]
    if instr.opcode == "DEPOLARIZE2":
        pa, pb = divmod(alt + 1, 4)
        terms = []
        if pa:
            terms.append((qubits[0], "IXYZ"[pa]))
        if pb:
            terms.append((qubits[1], "IXYZ"[pb]))
        return terms
    return [(t.qubit, t.axis) for t in instr.targets]


# -- deterministic propagation -----------------------------------------------------


class ColumnPropagator:
    """Propagate many injected Paulis through a program in one vectorized
    pass; column c of the frame arrays carries injection c."""

    def __init__(self, program: CircuitProgram,
                 injections: list[tuple[int, tuple[PauliTerm, ...]]]):
        """injections: list of (instruction_index, pauli_terms); the Pauli is
        applied immediately after that instruction executes."""
        self.program = program
        self.injections = injections
        by_instr: dict[int, list[tuple[int, tuple[PauliTerm, ...]]]] = {}
        for col, (idx, terms) in enumerate(injections):
            by_instr.setdefault(idx, []).append((col, terms))
        self._by_instr = by_instr

    def run(self) -> ShotOutcomes:
        walker = _Walker(self.program, len(self.injections))
        # channels inject nothing by themselves; injections attach to any
        # instruction index (including gates) and land right after it
        noise_ops = ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR")
        for i, instr in enumerate(self.program.instructions):
            op = instr.opcode
            if op in noise_ops:
                pass
            elif op in ("M", "MX", "MPP"):
                walker._measure(instr)
            elif op in ("COND_X", "COND_Z"):
                walker._cond(i, instr)
            elif op in ("DETECTOR", "OBSERVABLE"):
                walker._annotate(i, instr)
            elif op == "TICK":
                pass
            else:
                walker._gate(instr)
            self._maybe_inject(walker, i)
        return ShotOutcomes(walker.width, walker.det, walker.obs)

    def _maybe_inject(self, w: _Walker, i: int) -> None:
        for col, terms in self._by_instr.get(i, ()):
            for t in terms:
                if t.axis != "Z":
                    w.fx[t.qubit, col] ^= True
                if t.axis != "X":
                    w.fz[t.qubit, col] ^= True


def propagate_pauli(exp, instruction_index: int, pauli_terms) -> tuple[set[int], int]:
    """Symptom of one error alternative: (flipped detector ids, observable
    mask).  ``pauli_terms`` must be one of the channel's alternatives (or
    any Pauli set; it is injected right after the instruction)."""
    program = getattr(exp, "program", exp)
    instr = program.instructions[instruction_index]
    if instr.opcode not in ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR"):
        raise ValueError(f"instruction {instruction_index} is not an error channel")
    terms = tuple(pauli_terms)
    out = ColumnPropagator(program, [(instruction_index, terms)]).run()
    det_bits = out.detector_bits()[:, 0]
    obs_bits = out.observable_bits()[:, 0]
    mask = 0
    for k, b in enumerate(obs_bits):
        if b:
            mask |= 1 << k
    return set(np.flatnonzero(det_bits)), mask


# -- noiseless reference -------------------------------------------------------------


def strip_noise(program: CircuitProgram) -> CircuitProgram:
    """The noiseless variant: channel instructions removed."""
    noise_ops = ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR")
    instrs = []
    tags: dict[int, frozenset[str]] = {}
    for i, instr in enumerate(program.instructions):
        if instr.opcode in noise_ops:
            continue
        t = program.tags_for(i)
        if t:
            tags[len(instrs)] = t
        instrs.append(instr)
    return CircuitProgram(program.qubit_count, instrs, tags)


def assert_noiseless_deterministic(program: CircuitProgram, shots: int = 3,
                                   seed: int = 2024) -> None:
    """Oracle-run the noiseless variant; raise if any detector or observable
    ever reads 1.  Collapse randomness differs per shot, so a handful of
    shots probes determinism of every annotation."""
    ref = strip_noise(program)
    out = oracle_sample(ref, shots, seed)
    if out.detectors.any():
        bad = np.flatnonzero(out.detectors.any(axis=1))[:8]
        raise AssertionError(f"non-deterministic detectors, e.g. ids {bad.tolist()}")
    if out.observables.any():
        bad = np.flatnonzero(out.observables.any(axis=1))[:8]
        raise AssertionError(f"noiseless observables read 1: ids {bad.tolist()}")


# -- binary outcome dump ---------------------------------------------------------------


def write_outcomes(f, outcomes: ShotOutcomes) -> None:
    """Binary dump: text header, then per shot ceil((D+K)/8) bytes holding
    detector bits then observable bits, little-endian within each byte."""
    own = False
    if isinstance(f, str):
        f = open(f, "wb")
        own = True
    try:
        d, k = outcomes.num_detectors, outcomes.num_observables
        f.write(f"distqec-outcomes shots={outcomes.shots} detectors={d} observables={k}\n"
                .encode())
        bits = np.concatenate([outcomes.detector_bits(), outcomes.observable_bits()],
                              axis=0)
        rows = np.packbits(bits.T, axis=1, bitorder="little")
        f.write(rows.tobytes())
    finally:
        if own:
            f.close()


def read_outcomes(f) -> ShotOutcomes:
    own = False
    if isinstance(f, str):
        f = open(f, "rb")
        own = True
    try:
        header = f.readline().decode()
        fields = dict(kv.split("=") for kv in header.split()[1:])
        shots = int(fields["shots"])
        d = int(fields["detectors"])
        k = int(fields["observables"])
        row_bytes = (d + k + 7) // 8
        raw = np.frombuffer(f.read(shots * row_bytes), dtype=np.uint8)
        rows = raw.reshape(shots, row_bytes)
        bits = np.unpackbits(rows, axis=1, bitorder="little")[:, : d + k].T.astype(bool)
        det = np.packbits(bits[:d], axis=1, bitorder="little") if d else \
            np.zeros((0, (shots + 7) // 8), dtype=np.uint8)
        obs = np.packbits(bits[d:], axis=1, bitorder="little") if k else \
            np.zeros((0, (shots + 7) // 8), dtype=np.uint8)
        return ShotOutcomes(shots, det, obs)
    finally:
        if own:
            f.close()
