"""Quantum circuit intermediate representation and its text format.

Programs are flat lists of Clifford gates, Pauli noise channels,
measurements, classically conditioned Paulis, and detector/observable
annotations.  Every producer (code compilers) and consumer (samplers,
decoder) in this package works on :class:`CircuitProgram`.

Text format, one instruction per line::

    QUBITS 8
    RX 0 1
    CX 0 1
    DEPOLARIZE2(0.001) 0 1
    MPP X2*X3
    M 0 1
    COND_X rec[-1] 4
    DETECTOR rec[-1] rec[-2]
    OBSERVABLE(0) rec[-1]
    TICK

``#`` starts a comment.  Instruction tags (labels such as ``dropout`` that
carry noise-model metadata without changing circuit semantics) serialize as
trailing ``# tag:`` comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

__all__ = [
    "PauliTerm",
    "RecordRef",
    "Instruction",
    "CircuitProgram",
    "ParseError",
    "parse_program",
    "serialize_program",
    "validate_program",
    "count_resources",
    "OPCODES",
]

_AXES = ("X", "Y", "Z")


@dataclass(frozen=True, slots=True)
class PauliTerm:
    """A single-qubit Pauli factor; identity is represented by absence."""

    qubit: int
    axis: str

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"Pauli axis must be one of X/Y/Z, got {self.axis!r}")
        if self.qubit < 0:
            raise ValueError("Pauli qubit index must be non-negative")

    def __str__(self) -> str:
        return f"{self.axis}{self.qubit}"


@dataclass(frozen=True, slots=True)
class RecordRef:
    """Lookback reference to a measurement: ``rec[-k]`` is the k-th most recent."""

    offset: int

    def __post_init__(self):
        if self.offset >= 0:
            raise ValueError("record offsets must be negative")

    def __str__(self) -> str:
        return f"rec[{self.offset}]"


Target = Union[int, PauliTerm, RecordRef]

# opcode -> (kind, n_params)
# kind controls target/param validation and simulator dispatch.
OPCODES: dict[str, tuple[str, int]] = {
    "RZ": ("reset", 0),
    "RX": ("reset", 0),
    "H": ("gate1", 0),
    "S": ("gate1", 0),
    "SDAG": ("gate1", 0),
    "X": ("gate1", 0),
    "Y": ("gate1", 0),
    "Z": ("gate1", 0),
    "CX": ("gate2", 0),
    "CZ": ("gate2", 0),
    "M": ("measure", 0),
    "MX": ("measure", 0),
    "MPP": ("mpp", 0),
    "DEPOLARIZE1": ("noise1", 1),
    "DEPOLARIZE2": ("noise2", 1),
    "CORRELATED_ERROR": ("correlated", 1),
    "COND_X": ("cond", 0),
    "COND_Z": ("cond", 0),
    "DETECTOR": ("detector", 0),
    "OBSERVABLE": ("observable", 1),
    "TICK": ("tick", 0),
}


@dataclass(frozen=True, slots=True)
class Instruction:
    opcode: str
    targets: tuple[Target, ...] = ()
    params: tuple[float, ...] = ()

    @property
    def kind(self) -> str:
        return OPCODES[self.opcode][0]

    def num_measurements(self) -> int:
        kind = self.kind
        if kind == "measure":
            return len(self.targets)
        if kind == "mpp":
            return 1
        return 0

    def __str__(self) -> str:
        parts = [self.opcode]
        if self.params:
            rendered = ",".join(_format_param(self.opcode, p) for p in self.params)
            parts[0] = f"{self.opcode}({rendered})"
        if self.opcode in ("MPP", "CORRELATED_ERROR"):
            qubit_terms = [t for t in self.targets if isinstance(t, PauliTerm)]
            parts.append("*".join(str(t) for t in qubit_terms))
        else:
            parts.extend(str(t) for t in self.targets)
        return " ".join(p for p in parts if p)


def _format_param(opcode: str, p: float) -> str:
    if opcode == "OBSERVABLE":
        return str(int(p))
    # repr round-trips exactly, so p_eff values like p_dropout/512 survive IO.
    return repr(float(p))


class ParseError(ValueError):
    """Syntax or semantic error in circuit text, with a 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass
class CircuitProgram:
    """An ordered, immutable-by-convention instruction list.

    ``tags`` maps instruction index to a set of labels.  Tags never change
    sampling semantics; they exist so downstream passes (detector error
    model construction, channel accounting) can classify instructions.
    """

    qubit_count: int
    instructions: list[Instruction] = field(default_factory=list)
    tags: dict[int, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        self._meas_offsets: list[int] | None = None

    # -- measurement bookkeeping ------------------------------------------

    def measurement_offsets(self) -> list[int]:
        """Number of measurement records preceding each instruction."""
        if self._meas_offsets is None or len(self._meas_offsets) != len(self.instructions):
            offsets = []
            n = 0
            for instr in self.instructions:
                offsets.append(n)
                n += instr.num_measurements()
            self._meas_offsets = offsets
        return self._meas_offsets

    @property
    def num_measurements(self) -> int:
        offsets = self.measurement_offsets()
        if not self.instructions:
            return 0
        return offsets[-1] + self.instructions[-1].num_measurements()

    @property
    def num_detectors(self) -> int:
        return sum(1 for i in self.instructions if i.opcode == "DETECTOR")

    @property
    def num_observables(self) -> int:
        idx = {int(i.params[0]) for i in self.instructions if i.opcode == "OBSERVABLE"}
        return len(idx)

    def resolve_record(self, instr_index: int, ref: RecordRef) -> int:
        """Absolute measurement index referenced by ``ref`` at ``instr_index``."""
        before = self.measurement_offsets()[instr_index]
        abs_index = before + ref.offset
        if abs_index < 0:
            raise IndexError(
                f"instruction {instr_index}: rec[{ref.offset}] reaches before the record"
            )
        return abs_index

    def tags_for(self, instr_index: int) -> frozenset[str]:
        return self.tags.get(instr_index, frozenset())

    def copy(self) -> "CircuitProgram":
        return CircuitProgram(self.qubit_count, list(self.instructions), dict(self.tags))

    def __eq__(self, other) -> bool:
        if not isinstance(other, CircuitProgram):
            return NotImplemented
        return (
            self.qubit_count == other.qubit_count
            and self.instructions == other.instructions
            and self.tags == other.tags
        )


# -- parsing ---------------------------------------------------------------

_REC_RE = re.compile(r"^rec\[(-?\d+)\]$")
_PAULI_RE = re.compile(r"^([XYZ])(\d+)$")
_HEAD_RE = re.compile(r"^([A-Z0-9_]+)(?:\(([^)]*)\))?$")


def _parse_target(tok: str, line_no: int) -> Target:
    m = _REC_RE.match(tok)
    if m:
        off = int(m.group(1))
        if off >= 0:
            raise ParseError(line_no, "record offsets must be negative")
        return RecordRef(off)
    if tok and tok[0] in "XYZ":
        m = _PAULI_RE.match(tok)
        if not m:
            raise ParseError(line_no, f"malformed Pauli term {tok!r}")
        return PauliTerm(int(m.group(2)), m.group(1))
    try:
        q = int(tok)
    except ValueError:
        raise ParseError(line_no, f"unrecognized target {tok!r}") from None
    if q < 0:
        raise ParseError(line_no, f"negative qubit index {q}")
    return q


def _parse_pauli_product(tok: str, line_no: int) -> list[PauliTerm]:
    terms = []
    for part in tok.split("*"):
        m = _PAULI_RE.match(part)
        if not m:
            raise ParseError(line_no, f"malformed Pauli product {tok!r}")
        terms.append(PauliTerm(int(m.group(2)), m.group(1)))
    return terms


def parse_program(text: str | Iterable[str]) -> CircuitProgram:
    """Parse circuit text into a program.

    Raises :class:`ParseError` with the offending line number on syntax
    errors, unknown opcodes, malformed Pauli products, or out-of-range
    record references.
    """
    if isinstance(text, str):
        lines: Iterator[tuple[int, str]] = enumerate(text.splitlines(), start=1)
    else:
        lines = enumerate(text, start=1)

    qubit_count: int | None = None
    instructions: list[Instruction] = []
    tags: dict[int, frozenset[str]] = {}
    n_meas = 0

    for line_no, raw in lines:
        line = raw
        tag_labels: frozenset[str] | None = None
        if "#" in line:
            line, _, comment = line.partition("#")
            comment = comment.strip()
            if comment.startswith("tag:"):
                labels = comment[len("tag:"):].split()
                tag_labels = frozenset(labels)
        line = line.strip()
        if not line:
            continue

        toks = line.split()
        if qubit_count is None:
            if toks[0] != "QUBITS" or len(toks) != 2:
                raise ParseError(line_no, "expected header 'QUBITS n'")
            try:
                qubit_count = int(toks[1])
            except ValueError:
                raise ParseError(line_no, f"bad qubit count {toks[1]!r}") from None
            if qubit_count < 0:
                raise ParseError(line_no, "qubit count must be non-negative")
            continue

        m = _HEAD_RE.match(toks[0])
        if not m:
            raise ParseError(line_no, f"malformed instruction head {toks[0]!r}")
        opcode, params_text = m.group(1), m.group(2)
        if opcode not in OPCODES:
            raise ParseError(line_no, f"unknown opcode {opcode!r}")
        kind, n_params = OPCODES[opcode]

        params: tuple[float, ...] = ()
        if params_text is not None:
            try:
                params = tuple(float(p) for p in params_text.split(",") if p != "")
            except ValueError:
                raise ParseError(line_no, f"bad parameter list ({params_text})") from None
        if len(params) != n_params:
            raise ParseError(
                line_no, f"{opcode} takes {n_params} parameter(s), got {len(params)}"
            )

        targets: list[Target] = []
        if opcode in ("MPP", "CORRELATED_ERROR"):
            if len(toks) != 2:
                raise ParseError(line_no, f"{opcode} takes a single Pauli product")
            targets.extend(_parse_pauli_product(toks[1], line_no))
        else:
            for tok in toks[1:]:
                targets.append(_parse_target(tok, line_no))

        instr = Instruction(opcode, tuple(targets), params)
        for t in instr.targets:
            if isinstance(t, RecordRef) and n_meas + t.offset < 0:
                raise ParseError(
                    line_no, f"rec[{t.offset}] out of range ({n_meas} measurements so far)"
                )
        if tag_labels:
            tags[len(instructions)] = tag_labels
        instructions.append(instr)
        n_meas += instr.num_measurements()

    if qubit_count is None:
        raise ParseError(0, "empty input: missing 'QUBITS n' header")
    return CircuitProgram(qubit_count, instructions, tags)


def serialize_program(prog: CircuitProgram) -> str:
    """Render a program to its text form.  Inverse of :func:`parse_program`."""
    out = [f"QUBITS {prog.qubit_count}"]
    for i, instr in enumerate(prog.instructions):
        line = str(instr)
        labels = prog.tags.get(i)
        if labels:
            line += " # tag: " + " ".join(sorted(labels))
        out.append(line)
    return "\n".join(out) + "\n"


# -- validation --------------------------------------------------------------


def validate_program(prog: CircuitProgram) -> list[str]:
    """Check every structural invariant; returns violations as strings.

    Always returns (never raises): violations are data.  An empty list
    means the program is well-formed.
    """
    v: list[str] = []

    def bad(i: int, msg: str) -> None:
        v.append(f"instruction {i}: {msg}")

    n_meas = 0
    obs_indices: set[int] = set()
    for i, instr in enumerate(prog.instructions):
        if instr.opcode not in OPCODES:
            bad(i, f"unknown opcode {instr.opcode!r}")
            continue
        kind, n_params = OPCODES[instr.opcode]
        if len(instr.params) != n_params:
            bad(i, f"{instr.opcode} takes {n_params} parameter(s)")
        if kind in ("noise1", "noise2", "correlated"):
            for p in instr.params:
                if not (0.0 <= p <= 1.0):
                    bad(i, f"probability {p} outside [0, 1]")

        qubits = [t for t in instr.targets if isinstance(t, int)]
        paulis = [t for t in instr.targets if isinstance(t, PauliTerm)]
        recs = [t for t in instr.targets if isinstance(t, RecordRef)]

        for q in qubits:
            if not (0 <= q < prog.qubit_count):
                bad(i, f"qubit {q} out of range for {prog.qubit_count} qubits")
        for t in paulis:
            if not (0 <= t.qubit < prog.qubit_count):
                bad(i, f"qubit {t.qubit} out of range for {prog.qubit_count} qubits")

        if kind in ("gate1", "reset", "measure"):
            if paulis or recs:
                bad(i, f"{instr.opcode} takes qubit targets only")
            if not qubits:
                bad(i, f"{instr.opcode} needs at least one qubit target")
            if len(set(qubits)) != len(qubits):
                bad(i, f"{instr.opcode} qubits must be distinct")
        elif kind in ("gate2", "noise2"):
            if paulis or recs:
                bad(i, f"{instr.opcode} takes qubit targets only")
            if len(qubits) == 0 or len(qubits) % 2 != 0:
                bad(i, f"{instr.opcode} takes an even number of qubit targets")
            for a, b in zip(qubits[::2], qubits[1::2]):
                if a == b:
                    bad(i, f"{instr.opcode} pair ({a}, {b}) must be distinct qubits")
        elif kind == "noise1":
            if paulis or recs or not qubits:
                bad(i, f"{instr.opcode} takes qubit targets only")
        elif kind == "mpp":
            if len(paulis) != 2 or qubits or recs:
                bad(i, "MPP takes a product of exactly two Pauli terms")
            elif paulis[0].qubit == paulis[1].qubit:
                bad(i, "MPP qubits must be distinct")
        elif kind == "correlated":
            if not paulis or qubits or recs:
                bad(i, "CORRELATED_ERROR takes one or more Pauli terms")
            if len({t.qubit for t in paulis}) != len(paulis):
                bad(i, "CORRELATED_ERROR qubits must be distinct")
        elif kind == "cond":
            if len(recs) != 1 or len(qubits) != 1 or paulis:
                bad(i, f"{instr.opcode} takes one record reference and one qubit")
        elif kind in ("detector", "observable"):
            if qubits or paulis or not recs:
                bad(i, f"{instr.opcode} takes record references only")
            if kind == "observable" and instr.params:
                k = instr.params[0]
                if k != int(k) or k < 0:
                    bad(i, f"observable index {k} must be a non-negative integer")
                else:
                    obs_indices.add(int(k))
        elif kind == "tick":
            if instr.targets:
                bad(i, "TICK takes no targets")

        for t in recs:
            if n_meas + t.offset < 0:
                bad(i, f"rec[{t.offset}] out of range ({n_meas} measurements so far)")
        n_meas += instr.num_measurements()

    if obs_indices and obs_indices != set(range(len(obs_indices))):
        v.append(f"observable indices {sorted(obs_indices)} are not contiguous from 0")
    return v


# -- resource accounting -----------------------------------------------------


def count_resources(prog: CircuitProgram) -> dict:
    """Exact, deterministic instruction census.

    Returns ``{"gates": {opcode: count}, "measurements": n, "detectors": n,
    "observables": n, "tags": {label: count}}``.
    """
    gates: dict[str, int] = {}
    tag_counts: dict[str, int] = {}
    n_meas = 0
    n_det = 0
    for i, instr in enumerate(prog.instructions):
        gates[instr.opcode] = gates.get(instr.opcode, 0) + 1
        n_meas += instr.num_measurements()
        if instr.opcode == "DETECTOR":
            n_det += 1
        for label in prog.tags_for(i):
            tag_counts[label] = tag_counts.get(label, 0) + 1
    return {
        "gates": gates,
        "measurements": n_meas,
        "detectors": n_det,
        "observables": prog.num_observables,
        "tags": tag_counts,
    }
