import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distqec.circuit import (CircuitProgram, Instruction, ParseError,
                             PauliTerm, RecordRef, count_resources,
                             parse_program, serialize_program,
                             validate_program)
from gen_circuits import random_program


def test_minimal_bell_program():
    prog = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]")
    assert prog.qubit_count == 2
    assert len(prog.instructions) == 4
    assert validate_program(prog) == []
    assert prog.num_measurements == 2


def test_correlated_error_p_eff_exact_round_trip():
    p_eff = 1e-4 / 512
    text = f"QUBITS 6\nCORRELATED_ERROR({p_eff!r}) X0*Z3*Y5\n"
    prog = parse_program(text)
    instr = prog.instructions[0]
    assert instr.params[0] == p_eff == 1.953125e-07
    assert instr.targets == (PauliTerm(0, "X"), PauliTerm(3, "Z"), PauliTerm(5, "Y"))
    assert parse_program(serialize_program(prog)) == prog


def test_positive_record_offset_rejected():
    with pytest.raises(ParseError, match="line 2"):
        parse_program("QUBITS 2\nCOND_X rec[0] 1\n")


def test_unknown_opcode_and_malformed_pauli():
    with pytest.raises(ParseError, match="unknown opcode"):
        parse_program("QUBITS 1\nFROB 0\n")
    with pytest.raises(ParseError, match="Pauli"):
        parse_program("QUBITS 2\nMPP X0*W1\n")


def test_out_of_range_record_at_parse():
    with pytest.raises(ParseError, match="out of range"):
        parse_program("QUBITS 2\nM 0\nDETECTOR rec[-2]\n")


def test_empty_program_serialization():
    prog = CircuitProgram(0, [])
    assert serialize_program(prog) == "QUBITS 0\n"
    assert parse_program("QUBITS 0\n") == prog


def test_depolarize2_line():
    prog = CircuitProgram(2, [Instruction("DEPOLARIZE2", (0, 1), (0.01,))])
    assert "DEPOLARIZE2(0.01) 0 1" in serialize_program(prog)


def test_validator_examples():
    bell = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]")
    assert validate_program(bell) == []

    dup = CircuitProgram(2, [Instruction("MPP", (PauliTerm(0, "X"), PauliTerm(0, "X")))])
    assert validate_program(dup) == ["instruction 0: MPP qubits must be distinct"]

    short = CircuitProgram(1, [Instruction("M", (0,)), Instruction("M", (0,)),
                               Instruction("DETECTOR", (RecordRef(-5),))])
    violations = validate_program(short)
    assert any("out of range" in v for v in violations)


def test_validator_total_on_garbage_input():
    # arbitrary bytes either fail to parse with a positioned error or
    # produce a program the validator handles without raising
    rng = np.random.default_rng(5)
    for _ in range(300):
        blob = bytes(rng.integers(0, 256, size=rng.integers(1, 120))).decode(
            "latin1")
        try:
            prog = parse_program("QUBITS 3\n" + blob)
        except ParseError:
            continue
        validate_program(prog)


def test_tags_round_trip():
    text = "QUBITS 2\nCORRELATED_ERROR(0.5) X0 # tag: dropout round=3\nM 0\n"
    prog = parse_program(text)
    assert prog.tags_for(0) == frozenset({"dropout", "round=3"})
    again = parse_program(serialize_program(prog))
    assert again == prog


def test_count_resources_examples():
    bell = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]")
    res = count_resources(bell)
    assert res["gates"] == {"H": 1, "CX": 1, "M": 1, "DETECTOR": 1}
    assert res["measurements"] == 2
    assert res["detectors"] == 1
    empty = CircuitProgram(0, [])
    res0 = count_resources(empty)
    assert res0["gates"] == {} and res0["measurements"] == 0
    assert res0["detectors"] == 0 and res0["observables"] == 0


def test_measurement_indexing_resolution():
    prog = parse_program("QUBITS 2\nM 0 1\nM 0\nDETECTOR rec[-1] rec[-3]\n")
    det_idx = 2
    refs = [prog.resolve_record(det_idx, t) for t in prog.instructions[2].targets]
    assert refs == [2, 0]
    assert all(0 <= r < prog.num_measurements for r in refs)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip_random_programs(seed):
    rng = np.random.default_rng(seed)
    prog = random_program(rng, n_qubits=int(rng.integers(2, 10)),
                          n_ops=int(rng.integers(5, 120)))
    text = serialize_program(prog)
    again = parse_program(text)
    assert again == prog
    assert validate_program(again) == []
    # whitespace robustness
    noisy = "\n".join("  " + line + "  " for line in text.splitlines())
    assert parse_program(noisy) == prog


def test_round_trip_ten_thousand_cases():
    """Bulk round-trip identity sweep over small random programs."""
    rng = np.random.default_rng(424242)
    for trial in range(10_000):
        prog = random_program(rng, n_qubits=int(rng.integers(2, 7)),
                              n_ops=int(rng.integers(3, 25)),
                              max_detectors=6)
        assert parse_program(serialize_program(prog)) == prog, trial
