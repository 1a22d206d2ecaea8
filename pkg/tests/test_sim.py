import numpy as np
import pytest

from distqec.circuit import PauliTerm, parse_program
from distqec.sim import (FrameSampler, ShotOutcomes, oracle_sample,
                         propagate_pauli, read_outcomes, sample_error_pattern,
                         sample_frames, write_outcomes)
from distqec.tableau import PauliVec, StabilizerTableau
from gen_circuits import random_program


def test_zero_noise_all_outcomes_zero():
    prog = parse_program(
        "QUBITS 3\nH 0\nCX 0 1\nCX 1 2\nM 0 1 2\n"
        "DETECTOR rec[-1] rec[-2]\nDETECTOR rec[-2] rec[-3]\n")
    out = sample_frames(prog, 100, seed=0)
    assert not out.detectors.any()
    out_o = oracle_sample(prog, 100, seed=1)
    assert not out_o.detectors.any()


def test_forced_correlated_error_flips_every_shot():
    prog = parse_program("QUBITS 1\nCORRELATED_ERROR(1) X0\nM 0\nDETECTOR rec[-1]\n")
    for engine in (sample_frames, oracle_sample):
        out = engine(prog, 40, seed=3)
        assert out.detector_bits().all()


def test_bell_pair_oracle_correlations():
    prog = parse_program("QUBITS 2\nH 0\nCX 0 1\nM 0 1\nDETECTOR rec[-1] rec[-2]")
    out = oracle_sample(prog, 300, seed=9)
    assert not out.detectors.any()


def test_teleportation_gadget_preserves_stabilizer_states():
    """|psi> on qubit 0 teleports to qubit 2 for all six 1-qubit states."""
    preps = {
        "Z+": "", "Z-": "X 0\n", "X+": "H 0\n", "X-": "X 0\nH 0\n",
        "Y+": "H 0\nS 0\n", "Y-": "X 0\nH 0\nS 0\n",
    }
    meas = {
        "Z+": ("M", 0), "Z-": ("M", 1), "X+": ("MX", 0), "X-": ("MX", 1),
        "Y+": ("Y", 0), "Y-": ("Y", 1),
    }
    for state, prep in preps.items():
        op, expect = meas[state]
        if op == "Y":
            readout = "SDAG 2\nH 2\nM 2\n"
        elif op == "MX":
            readout = "MX 2\n"
        else:
            readout = "M 2\n"
        text = (
            "QUBITS 3\n" + prep +
            "H 1\nCX 1 2\n"           # Bell resource on (1, 2)
            "CX 0 1\nH 0\n"
            "M 1\nM 0\n"
            "COND_X rec[-2] 2\nCOND_Z rec[-1] 2\n" +
            readout +
            "DETECTOR rec[-1]\n")
        prog = parse_program(text)
        out = oracle_sample(prog, 50, seed=17)
        bits = out.detector_bits()[0]
        assert bits.all() == bool(expect) and (bits.any() == bool(expect)), \
            f"teleport broke state {state}"


def test_engine_equivalence_shared_patterns():
    rng = np.random.default_rng(123)
    for trial in range(150):
        prog = random_program(rng, n_qubits=int(rng.integers(2, 10)),
                              n_ops=int(rng.integers(20, 140)))
        pat = sample_error_pattern(prog, 24, seed=5000 + trial)
        a = sample_frames(prog, 24, seed=0, pattern=pat)
        b = oracle_sample(prog, 24, seed=777, pattern=pat)
        assert a == b, f"engines disagree on trial {trial}"


def test_sampler_determinism():
    rng = np.random.default_rng(7)
    prog = random_program(rng, n_qubits=6, n_ops=120)
    a = sample_frames(prog, 500, seed=42)
    b = sample_frames(prog, 500, seed=42)
    assert a == b
    c = sample_frames(prog, 500, seed=43)
    assert not (a == c)


def test_channel_firing_statistics_within_5_sigma():
    p = 0.37
    shots = 10 ** 6
    prog = parse_program(f"QUBITS 1\nDEPOLARIZE1({p}) 0\nM 0\nDETECTOR rec[-1]\n")
    out = sample_frames(prog, shots, seed=99)
    # X and Y flip the Z measurement: expected rate 2p/3
    rate = out.detector_bits()[0].mean()
    expect = 2 * p / 3
    sigma = np.sqrt(expect * (1 - expect) / shots)
    assert abs(rate - expect) < 5 * sigma


def test_sparse_and_dense_paths_agree_statistically():
    shots = 200_000
    for p in (0.01, 0.2):  # below and above the dense threshold
        prog = parse_program(f"QUBITS 2\nDEPOLARIZE2({p}) 0 1\nM 0\nM 1\n"
                             "DETECTOR rec[-2]\nDETECTOR rec[-1]\n")
        out = sample_frames(prog, shots, seed=5)
        rate = out.detector_bits()[0].mean()
        expect = 8 * p / 15  # alternatives flipping qubit 0's Z readout
        sigma = np.sqrt(expect * (1 - expect) / shots)
        assert abs(rate - expect) < 5 * sigma, (p, rate, expect)


def test_propagate_pauli_symptoms_and_linearity():
    prog = parse_program(
        "QUBITS 2\nCORRELATED_ERROR(0.1) X0\nCORRELATED_ERROR(0.1) Z1\n"
        "CX 0 1\nM 0\nM 1\nDETECTOR rec[-2]\nDETECTOR rec[-1]\n"
        "OBSERVABLE(0) rec[-1]\n")
    d1, m1 = propagate_pauli(prog, 0, [PauliTerm(0, "X")])
    assert d1 == {0, 1} and m1 == 1  # X spreads through CX to both readouts
    d2, m2 = propagate_pauli(prog, 1, [PauliTerm(1, "Z")])
    assert d2 == set() and m2 == 0
    # Z before a Z-basis measurement is silent; X on control flips both
    dz, _ = propagate_pauli(prog, 0, [PauliTerm(0, "Z")])
    assert dz == set()
    # linearity: symptom of both = XOR of symptoms
    both = parse_program(
        "QUBITS 2\nCORRELATED_ERROR(1) X0\nCORRELATED_ERROR(1) X1\n"
        "CX 0 1\nM 0\nM 1\nDETECTOR rec[-2]\nDETECTOR rec[-1]\n")
    da, _ = propagate_pauli(both, 0, [PauliTerm(0, "X")])
    db, _ = propagate_pauli(both, 1, [PauliTerm(1, "X")])
    out = sample_frames(both, 4, seed=0)
    fired = set(np.flatnonzero(out.detector_bits()[:, 0]))
    assert fired == da ^ db


def test_outcomes_binary_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    prog = random_program(rng, n_qubits=5, n_ops=80)
    out = sample_frames(prog, 333, seed=8)
    path = str(tmp_path / "o.bin")
    write_outcomes(path, out)
    back = read_outcomes(path)
    assert back == out


def test_oracle_qubit_guard():
    prog = parse_program("QUBITS 3\nM 0\n")
    with pytest.raises(ValueError, match="oracle"):
        oracle_sample(prog, 1, seed=0, max_qubits=2)


def test_tableau_stabilizer_membership():
    tab = StabilizerTableau(2)
    tab.h(0)
    tab.cx(0, 1)
    assert tab.stabilizer_contains(PauliVec(2, [(0, "X"), (1, "X")]))
    assert tab.stabilizer_contains(PauliVec(2, [(0, "Z"), (1, "Z")]))
    assert not tab.stabilizer_contains(PauliVec(2, [(0, "Z")]))
