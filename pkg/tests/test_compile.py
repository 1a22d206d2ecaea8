import math

import numpy as np
import pytest

from distqec.circuit import count_resources, validate_program
from distqec.codes import build_honeycomb, build_repetition, build_toric, make_schedule
from distqec.compile import (NoiseParams, TimingModel, attach_node_dropout,
                             compile_memory, compile_monolithic,
                             compile_monolithic_ensemble, compile_swapout)
from distqec.partition import (build_connectivity_graph, make_layout,
                               spectral_partition)
from distqec.sim import oracle_sample, sample_frames, strip_noise


def dist_layout(code, nq, seed=7):
    sched = make_schedule(code)
    graph = build_connectivity_graph(sched)
    part = spectral_partition(graph, nq, seed=seed)
    return sched, make_layout(part, sched, nq)


@pytest.fixture(scope="module")
def toric2():
    return dist_layout(build_toric(2), 8)


def test_all_modes_noiseless_deterministic(toric2):
    sched, lay = toric2
    zero = NoiseParams(p=0.0)
    exps = {
        "memory": compile_memory(sched, lay, zero, rounds=4, pad=1),
        "swapout": compile_swapout(sched, lay, zero, rounds=4, pad=1,
                                   swap_after_round=2),
        "monolithic": compile_monolithic(sched, zero, rounds=4, pad=1),
    }
    for name, exp in exps.items():
        assert validate_program(exp.program) == [], name
        exp.validate_noiseless(shots=5)
        assert exp.k == 2


def test_swapout_equals_memory_noiselessly(toric2):
    """With all noise zeroed, detector and observable streams agree."""
    sched, lay = toric2
    zero = NoiseParams(p=0.0)
    mem = compile_memory(sched, lay, zero, rounds=4, pad=1)
    swp = compile_swapout(sched, lay, zero, rounds=4, pad=1, swap_after_round=2)
    a = oracle_sample(mem.program, 30, seed=4)
    b = oracle_sample(swp.program, 30, seed=4)
    assert not a.detectors.any() and not b.detectors.any()
    assert not a.observables.any() and not b.observables.any()
    assert a.num_detectors == b.num_detectors


def test_bell_fidelity_parameterization(toric2):
    sched, lay = toric2
    noise = NoiseParams(p=1e-3)
    assert noise.p_nl == pytest.approx(0.01)
    # DEPOLARIZE2(p_nl) leaves the Bell state fixed for 3 of 15 Paulis
    assert 1 - (12 / 15) * noise.p_nl == pytest.approx(0.992)
    exp = compile_memory(sched, lay, noise, rounds=2, pad=1)
    bells = [i for i, t in exp.program.tags.items() if "nonlocal" in t]
    assert bells
    for i in bells:
        instr = exp.program.instructions[i]
        assert instr.opcode == "DEPOLARIZE2"
        assert instr.params[0] == pytest.approx(noise.p_nl)


def test_nonlocal_channel_count_matches_layout_demand(toric2):
    """Bell insertions per round equal the layout's per-round Bell demand."""
    sched, lay = toric2
    noise = NoiseParams(p=1e-3)
    rounds = 3
    exp = compile_memory(sched, lay, noise, rounds=rounds, pad=0)
    res = count_resources(exp.program)
    n_bell_channels = res["tags"]["nonlocal"]
    demand_per_round = sum(
        info.n_bells for info in lay.nonlocal_checks.values())
    assert n_bell_channels == rounds * demand_per_round


def test_qpi_constraint_holds(toric2):
    sched, lay = toric2
    exp = compile_memory(sched, lay, NoiseParams(p=1e-3), rounds=3, pad=1)
    assert exp.metadata["max_live_halves"] <= lay.qpi_count


def test_idle_conservation(toric2):
    """Per noisy round, data/ancilla busy + idle time equals the duration."""
    sched, lay = toric2
    noise = NoiseParams(p=1e-3)
    exp = compile_memory(sched, lay, noise, rounds=2, pad=0)
    prog = exp.program
    durations = exp.metadata["durations"]
    # reconstruct per-qubit idle charge of round 0 from the emitted channel
    idle_p = {}
    for i, instr in enumerate(prog.instructions[: exp.round_ends[0]]):
        if "idle" in prog.tags_for(i):
            for q in instr.targets:
                idle_p[q] = instr.params[0]
    # busy time for a data qubit: 4 check gates (2 stars + 2 plaquettes)
    dur = durations[0]
    for q in range(sched.n_data):
        t_idle = round(math.log(1 - idle_p[q]) / math.log(1 - noise.p))
        busy = dur - t_idle
        assert busy == 4, f"data qubit {q}: busy {busy}"


def test_pads_are_noiseless(toric2):
    sched, lay = toric2
    exp = compile_memory(sched, lay, NoiseParams(p=1e-3), rounds=1, pad=2)
    prog = exp.program
    noisy = [i for i, ins in enumerate(prog.instructions)
             if ins.kind in ("noise1", "noise2", "correlated")]
    # all noise sits strictly inside the single noisy round
    lo = exp.round_ends[0] - 1
    ticks = [i for i, ins in enumerate(prog.instructions) if ins.opcode == "TICK"]
    start_noisy = ticks[1]  # after two pad rounds... pad=2? pad=2 rounds before
    assert noisy, "no channels emitted"
    assert min(noisy) > ticks[exp.pad - 1]
    assert max(noisy) < exp.round_ends[-1]


def test_dropout_channel_accounting(toric2):
    sched, lay = toric2
    noise = NoiseParams(p=1e-3, p_dropout=1e-4, e=32)
    exp = compile_memory(sched, lay, noise, rounds=3, pad=1)
    expd = attach_node_dropout(exp, lay, noise, seed=9)
    idx = expd.dropout_channel_indices
    assert len(idx) == len(lay.partition.clusters) * 3 * 32
    p_eff = 1e-4 / 32
    for i in idx:
        instr = expd.program.instructions[i]
        assert instr.opcode == "CORRELATED_ERROR"
        assert instr.params[0] == pytest.approx(p_eff)
        # supports live on that cluster's data+ancilla qubits
        qs = {t.qubit for t in instr.targets}
        tags = expd.program.tags_for(i)
        ci = int(next(t for t in tags if t.startswith("cluster=")).split("=")[1])
        assert qs <= set(lay.partition.clusters[ci])
    expd.validate_noiseless(shots=2)


def test_dropout_zero_is_identity(toric2):
    sched, lay = toric2
    noise = NoiseParams(p=1e-3, p_dropout=0.0)
    exp = compile_memory(sched, lay, noise, rounds=2, pad=1)
    assert attach_node_dropout(exp, lay, noise, seed=1) is exp


def test_dropout_support_distribution():
    """Sampled supports on a 2-qubit node cover the 15 nonidentity Paulis
    roughly uniformly."""
    from distqec.circuit import Instruction, PauliTerm
    from distqec.partition import Partition, NetworkLayout
    sched = make_schedule(build_repetition(2))  # 2 data + 1 ancilla
    # build a fake 2-qubit cluster to match the example
    part = Partition({0: 0, 1: 0, 2: 1}, [[0, 1], [2]])
    lay = NetworkLayout(part, 2, 2, {}, {}, comm_qubits={0: [], 1: []})
    noise = NoiseParams(p=1e-3, p_dropout=1e-4, e=2000)
    exp = compile_monolithic(sched, noise, rounds=1, pad=0)
    expd = attach_node_dropout(exp, lay, noise, seed=12)
    counts = {}
    for i in expd.dropout_channel_indices:
        instr = expd.program.instructions[i]
        tags = expd.program.tags_for(i)
        if "cluster=0" not in tags:
            continue
        key = tuple(sorted((t.qubit, t.axis) for t in instr.targets))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 15
    total = sum(counts.values())
    # chi-square against uniform over the 15 Paulis
    expected = total / 15
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    # 14 dof: 99.9th percentile ~ 36.1
    assert chi2 < 36.1, chi2


def test_monolithic_ensemble_weights_and_structure():
    sched = make_schedule(build_toric(2))
    noise = NoiseParams(p=1e-5, p_dropout=1e-4)
    members = compile_monolithic_ensemble(sched, noise, rounds=32, pad=1)
    assert len(members) == 33
    ws = [w for w, _ in members]
    residual = 1.0 - sum(ws)
    assert 0 < residual < 6e-6
    assert ws[0] == pytest.approx((1 - 1e-4) ** 32)
    assert ws[1] == pytest.approx(1e-4 * (1 - 1e-4) ** 31)
    # failure members carry 3 tagged half-probability flips per qubit
    w, exp5 = members[5]
    idx = exp5.dropout_channel_indices
    assert len(idx) == 3 * sched.n_qubits
    assert all(exp5.program.instructions[i].opcode == "CORRELATED_ERROR"
               and exp5.program.instructions[i].params[0] == 0.5 for i in idx)
    exp5.validate_noiseless(shots=2)


def test_failure_channel_is_uniform_depolarizing():
    """Three independent half-probability X, Y, Z flips compose to the
    uniform single-qubit channel (I/X/Y/Z each 1/4)."""
    from distqec.circuit import parse_program
    prog = parse_program(
        "QUBITS 1\n"
        "CORRELATED_ERROR(0.5) X0\nCORRELATED_ERROR(0.5) Y0\n"
        "CORRELATED_ERROR(0.5) Z0\n"
        "M 0\nDETECTOR rec[-1]\nTICK\n")
    shots = 200_000
    out = sample_frames(prog, shots, seed=77)
    rate = out.detector_bits()[0].mean()
    # X or Y outcomes flip the Z readout: probability 1/2
    assert abs(rate - 0.5) < 5 * math.sqrt(0.25 / shots)


def test_swapout_teleport_batching():
    """A 16-qubit target with 4 QPIs teleports in ceil(count/4) batches."""
    sched, lay = dist_layout(build_toric(2), 8)
    noise = NoiseParams(p=1e-3)
    exp = compile_swapout(sched, lay, noise, rounds=3, pad=1, swap_after_round=2)
    target = exp.metadata["target"]
    moved = len(lay.partition.clusters[target])
    assert exp.metadata["teleport_batches"] == math.ceil(moved / lay.qpi_count)


def test_swapout_bad_arguments(toric2):
    sched, lay = toric2
    with pytest.raises(ValueError):
        compile_swapout(sched, lay, NoiseParams(p=0.0), rounds=4,
                        swap_after_round=9)
    with pytest.raises(ValueError):
        compile_swapout(sched, lay, NoiseParams(p=0.0), rounds=4,
                        swap_after_round=2, target=99)


def test_monolithic_failure_round_bounds():
    sched = make_schedule(build_toric(2))
    with pytest.raises(ValueError):
        compile_monolithic(sched, NoiseParams(p=0.0), rounds=4, failure_round=5)
    with pytest.raises(ValueError):
        compile_memory(sched, None, NoiseParams(p=0.0), rounds=0)


def test_honeycomb_distributed_deterministic():
    sched, lay = dist_layout(build_honeycomb(2, 2), 4)
    assert lay.nonlocal_checks  # the 2-cluster split leaves nonlocal edges
    exp = compile_memory(sched, lay, NoiseParams(p=0.0), rounds=3, pad=1)
    exp.validate_noiseless(shots=5)
    noisy = compile_memory(sched, lay, NoiseParams(p=1e-3), rounds=3, pad=1)
    out = sample_frames(noisy, 2000, seed=1)
    assert out.detector_bits().mean() > 0  # channels actually fire


def test_zero_probability_channels_omitted(toric2):
    sched, lay = toric2
    exp = compile_memory(sched, lay, NoiseParams(p=0.0), rounds=3, pad=1)
    kinds = {ins.kind for ins in exp.program.instructions}
    assert "noise1" not in kinds and "noise2" not in kinds
