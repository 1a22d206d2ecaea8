"""Random Clifford+noise program generator with deterministic annotations.

Programs are built in two passes: a random instruction stream, then a
symbolic analysis pass that finds which measurement parities are
deterministic; those become DETECTOR/OBSERVABLE lines.  By construction
the emitted programs satisfy the frame sampler's precondition.
"""

from __future__ import annotations

import numpy as np

from distqec.circuit import CircuitProgram, Instruction, PauliTerm, RecordRef
from distqec.analysis import program_relations

_G1 = ("H", "S", "SDAG", "X", "Y", "Z")


def random_program(rng: np.random.Generator, n_qubits: int = 8,
                   n_ops: int = 120, p_hi: float = 0.3,
                   with_noise: bool = True,
                   max_detectors: int = 24) -> CircuitProgram:
    instrs: list[Instruction] = []
    n_meas = 0

    def add(op, targets=(), params=()):
        nonlocal n_meas
        ins = Instruction(op, tuple(targets), tuple(params))
        instrs.append(ins)
        n_meas += ins.num_measurements()

    for q in range(n_qubits):
        add("RZ", (q,))
    for _ in range(n_ops):
        r = rng.random()
        if r < 0.30:
            add(rng.choice(_G1), (int(rng.integers(n_qubits)),))
        elif r < 0.50:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            add(rng.choice(("CX", "CZ")), (int(a), int(b)))
        elif r < 0.58:
            add(rng.choice(("RZ", "RX")), (int(rng.integers(n_qubits)),))
        elif r < 0.76:
            kind = rng.random()
            if kind < 0.4:
                add("M", (int(rng.integers(n_qubits)),))
            elif kind < 0.7:
                add("MX", (int(rng.integers(n_qubits)),))
            else:
                a, b = rng.choice(n_qubits, size=2, replace=False)
                add("MPP", (PauliTerm(int(a), rng.choice(list("XYZ"))),
                            PauliTerm(int(b), rng.choice(list("XYZ")))))
        elif r < 0.84 and n_meas > 0:
            off = -int(rng.integers(1, min(n_meas, 8) + 1))
            add(rng.choice(("COND_X", "COND_Z")),
                (RecordRef(off), int(rng.integers(n_qubits))))
        elif with_noise:
            p = float(rng.uniform(0.0, p_hi))
            kind = rng.random()
            if kind < 0.4:
                add("DEPOLARIZE1", (int(rng.integers(n_qubits)),), (p,))
            elif kind < 0.8:
                a, b = rng.choice(n_qubits, size=2, replace=False)
                add("DEPOLARIZE2", (int(a), int(b)), (p,))
            else:
                k = int(rng.integers(1, min(4, n_qubits) + 1))
                qs = rng.choice(n_qubits, size=k, replace=False)
                add("CORRELATED_ERROR",
                    tuple(PauliTerm(int(q), rng.choice(list("XYZ"))) for q in qs),
                    (p,))
    # final readout sprinkling so late errors have symptoms
    for q in range(n_qubits):
        if rng.random() < 0.6:
            add("M", (int(q),))

    prog = CircuitProgram(n_qubits, instrs)
    rels = program_relations(prog)
    total = n_meas
    det_rels = [rel for rel in rels if rel.deterministic and rel.const == 0]
    rng.shuffle(det_rels)
    picked = det_rels[:max_detectors]
    obs_rels = det_rels[max_detectors:max_detectors + 2]
    for rel in picked:
        refs = tuple(RecordRef(m - total) for m in rel.detector_refs())
        prog.instructions.append(Instruction("DETECTOR", refs))
    for k, rel in enumerate(obs_rels):
        refs = tuple(RecordRef(m - total) for m in rel.detector_refs())
        prog.instructions.append(Instruction("OBSERVABLE", refs, (float(k),)))
    return prog
