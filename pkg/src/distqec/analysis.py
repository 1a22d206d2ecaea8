"""Symbolic execution of noiseless circuits.

Runs a program (or an abstract measurement sequence) through a symbolic
stabilizer tableau where every random measurement mints a variable and
every deterministic measurement reports the affine expression that fixes
its outcome.  Those expressions are the raw material for detector and
observable construction: a deterministic relation with constant 0 is a
parity of records that always reads 0, i.e. a valid detector.
"""

from __future__ import annotations

from dataclasses import dataclass

from .circuit import CircuitProgram, RecordRef
from .tableau import PauliVec, StabilizerTableau

__all__ = ["MeasurementRelation", "SymbolicRunner", "program_relations"]


@dataclass
class MeasurementRelation:
    """Outcome of measurement ``index`` described over earlier outcomes.

    ``deterministic`` measurements satisfy
    ``m[index] = const XOR parity(m[j] for j in depends_on)``.
    Random measurements have ``deterministic=False`` and name only
    themselves.
    """

    index: int
    deterministic: bool
    const: int = 0
    depends_on: tuple[int, ...] = ()

    def detector_refs(self) -> tuple[int, ...]:
        """Measurement indices whose parity is deterministically ``const``."""
        return tuple(sorted((*self.depends_on, self.index)))


class SymbolicRunner:
    """Drives a symbolic tableau over measurements and gates.

    Tracks the variable-to-measurement map so relations are expressed in
    measurement indices rather than internal variable ids.
    """

    def __init__(self, n_qubits: int):
        self.n = n_qubits
        self.tab = StabilizerTableau(n_qubits, symbolic=True)
        self.relations: list[MeasurementRelation] = []
        self._var_to_meas: list[int] = []
        self._meas_expr: list[tuple[int, int]] = []  # (const, var_mask) per measurement

    # -- gates ----------------------------------------------------------------

    def gate(self, opcode: str, *qubits: int) -> None:
        t = self.tab
        if opcode == "H":
            t.h(qubits[0])
        elif opcode == "S":
            t.s(qubits[0])
        elif opcode == "SDAG":
            t.sdag(qubits[0])
        elif opcode == "X":
            t.x_gate(qubits[0])
        elif opcode == "Y":
            t.y_gate(qubits[0])
        elif opcode == "Z":
            t.z_gate(qubits[0])
        elif opcode == "CX":
            t.cx(qubits[0], qubits[1])
        elif opcode == "CZ":
            t.cz(qubits[0], qubits[1])
        else:
            raise ValueError(f"unsupported gate {opcode}")

    # -- measurements -----------------------------------------------------------

    def measure(self, terms) -> MeasurementRelation:
        """Measure a Pauli product given as (qubit, axis) pairs."""
        idx = len(self._meas_expr)
        p = PauliVec(self.n, terms)
        const, var, was_random = self.tab.measure(p)
        if was_random:
            rel = MeasurementRelation(idx, False)
            self._var_to_meas.append(idx)
            self._meas_expr.append((0, var))
        else:
            deps = [self._var_to_meas[k] for k in _bits(var)]
            if any(d < 0 for d in deps):
                # depends on an unrecorded collapse (a reset of an
                # entangled qubit): not reconstructible from the record
                rel = MeasurementRelation(idx, False)
            else:
                rel = MeasurementRelation(idx, True, const, tuple(sorted(deps)))
            self._meas_expr.append((const, var))
        self.relations.append(rel)
        return rel

    def reset(self, q: int, basis: str) -> None:
        """Reset to |0> or |+> via measure + conditioned flip.  The internal
        measurement is not part of the record; if it was random, its fresh
        variable maps to -1 so downstream relations can spot it."""
        axis = "Z" if basis == "Z" else "X"
        p = PauliVec(self.n, [(q, axis)])
        const, var, was_random = self.tab.measure(p)
        if was_random:
            self._var_to_meas.append(-1)
        flip = PauliVec(self.n, [(q, "X" if axis == "Z" else "Z")])
        self.tab.apply_pauli_expr(flip, const, var)

    def cond_pauli(self, q: int, axis: str, meas_index: int) -> None:
        """Apply X/Z on q conditioned on a recorded measurement."""
        const, var = self._meas_expr[meas_index]
        # conditioning on the *outcome* m = const ^ vars
        p = PauliVec(self.n, [(q, axis)])
        self.tab.apply_pauli_expr(p, const, var)

    def measurement_expr(self, meas_index: int) -> tuple[int, int]:
        return self._meas_expr[meas_index]

    def var_to_meas(self) -> list[int]:
        return list(self._var_to_meas)


def _bits(mask: int) -> list[int]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


def program_relations(program: CircuitProgram) -> list[MeasurementRelation]:
    """Relations of every recorded measurement of a noiseless program.

    Noise channels are ignored; conditioned Paulis follow their record
    expressions, so feed-forward circuits analyze exactly.
    """
    runner = SymbolicRunner(program.qubit_count)
    offsets = program.measurement_offsets()
    for i, instr in enumerate(program.instructions):
        op = instr.opcode
        if op in ("DEPOLARIZE1", "DEPOLARIZE2", "CORRELATED_ERROR",
                  "TICK", "DETECTOR", "OBSERVABLE"):
            continue
        if op == "M":
            for q in instr.targets:
                runner.measure([(q, "Z")])
        elif op == "MX":
            for q in instr.targets:
                runner.measure([(q, "X")])
        elif op == "MPP":
            a, b = instr.targets
            runner.measure([(a.qubit, a.axis), (b.qubit, b.axis)])
        elif op in ("RZ", "RX"):
            for q in instr.targets:
                runner.reset(q, "Z" if op == "RZ" else "X")
        elif op in ("COND_X", "COND_Z"):
            ref = next(t for t in instr.targets if isinstance(t, RecordRef))
            q = next(t for t in instr.targets if isinstance(t, int))
            runner.cond_pauli(q, "X" if op == "COND_X" else "Z",
                              offsets[i] + ref.offset)
        elif op in ("CX", "CZ"):
            ts = instr.targets
            for a, b in zip(ts[::2], ts[1::2]):
                runner.gate(op, a, b)
        else:
            for q in instr.targets:
                runner.gate(op, q)
    return runner.relations
