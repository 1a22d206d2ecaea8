import heapq
import itertools
import math

import numpy as np
import pytest

from distqec._blossom import min_weight_perfect_matching
from distqec.circuit import PauliTerm, parse_program
from distqec.codes import build_repetition, build_toric, make_schedule
from distqec.compile import NoiseParams, compile_memory, compile_monolithic
from distqec.decode import (DetectorErrorModel, build_dem, mwpm_decode,
                            parse_dem, score_predictions, to_matching_graph,
                            write_dem)
from distqec.sim import ShotOutcomes, sample_frames


def syndrome_outcomes(n_det, dets, k=1):
    bits = np.zeros((n_det, 1), dtype=np.uint8)
    for d in dets:
        bits[d, 0] = 1
    return ShotOutcomes(1, np.packbits(bits, axis=1, bitorder="little"),
                        np.zeros((k, 1), dtype=np.uint8))


def test_dem_merges_within_channel():
    prog = parse_program("QUBITS 1\nDEPOLARIZE1(0.3) 0\nM 0\nDETECTOR rec[-1]\n")
    dem = build_dem(prog)
    assert dem.mechanisms == [(pytest.approx(0.2), (0,), 0)]


def test_dem_xor_across_channels():
    prog = parse_program("QUBITS 1\nCORRELATED_ERROR(0.1) X0\n"
                         "CORRELATED_ERROR(0.1) X0\nM 0\nDETECTOR rec[-1]\n")
    dem = build_dem(prog)
    assert dem.mechanisms == [(pytest.approx(0.18), (0,), 0)]


def test_dem_excludes_dropout_tagged():
    prog = parse_program("QUBITS 1\nCORRELATED_ERROR(0.1) X0 # tag: dropout\n"
                         "M 0\nDETECTOR rec[-1]\n")
    assert build_dem(prog).mechanisms == []


def test_dem_single_channel_at_p1_fires_exactly():
    """A circuit holding exactly one p=1 channel samples precisely that
    mechanism's symptom in every shot."""
    prog = parse_program(
        "QUBITS 2\nCORRELATED_ERROR(1) X0*Z1\nCX 0 1\nM 0\nMX 1\n"
        "DETECTOR rec[-2]\nDETECTOR rec[-1]\nOBSERVABLE(0) rec[-2]\n")
    dem = build_dem(prog)
    assert len(dem.mechanisms) == 1
    p, dets, mask = dem.mechanisms[0]
    assert p == 1.0
    out = sample_frames(prog, 256, seed=0)
    det_bits = out.detector_bits()
    for d in range(det_bits.shape[0]):
        want = d in dets
        assert det_bits[d].all() == want and det_bits[d].any() == want
    obs_bits = out.observable_bits()
    assert obs_bits[0].all() == bool(mask & 1)


def test_matching_graph_weight_formula():
    g = to_matching_graph(DetectorErrorModel(2, 0, [(0.01, (0, 1), 0)]))
    assert g.edges[(0, 1)][1] == pytest.approx(math.log(99))


def test_empty_dem_empty_graph():
    g = to_matching_graph(DetectorErrorModel(0, 0, []))
    assert g.edges == {} and g.sectors == []


def test_decomposition_covers_toric_dem():
    sched = make_schedule(build_toric(4))
    exp = compile_monolithic(sched, NoiseParams(p=1e-3), rounds=3, pad=1)
    dem = build_dem(exp)
    g = to_matching_graph(dem)
    assert g.dropped_mass == 0.0
    assert len(g.sectors) == 2  # X and Z sectors decouple on the torus
    assert not any(s.has_boundary for s in g.sectors)


def test_d2_degenerate_masks_are_folded_not_dropped():
    """At distance 2 the same detector pair carries conflicting observable
    masks; the reduction folds such mechanisms and reports the ambiguous
    mass instead of dropping it."""
    sched = make_schedule(build_toric(2))
    exp = compile_monolithic(sched, NoiseParams(p=1e-3), rounds=2, pad=1)
    g = to_matching_graph(build_dem(exp))
    assert g.dropped_mass == 0.0
    assert g.mask_mismatch_mass > 0


def test_decomposition_symptom_exactness():
    """Every wide mechanism equals the XOR of its assigned edges (d=4, where
    no distance degeneracy exists)."""
    from distqec.decode import _edge_key, _decompose, _xor_p
    sched = make_schedule(build_toric(4))
    exp = compile_monolithic(sched, NoiseParams(p=1e-3), rounds=2, pad=1)
    dem = build_dem(exp)
    edges = {}
    wide = []
    for p, dets, mask in dem.mechanisms:
        if len(dets) <= 2:
            key = _edge_key(dets)
            edges.setdefault(key, {})
            edges[key][mask] = _xor_p(edges[key].get(mask, 0.0), p)
        else:
            wide.append((p, dets, mask))
    flat = {}
    for key, bucket in edges.items():
        best = max(bucket, key=lambda m: (bucket[m], -m))
        flat[key] = [bucket[best], best]
    assert wide
    for p, dets, mask in wide:
        used = _decompose(flat, dets, mask)
        assert used is not None, (dets, mask)
        covered = set()
        acc_mask = 0
        for key in used:
            u, v = key
            part = {u} if v == -1 else {u, v}
            assert not (covered & part)
            covered |= part
            acc_mask ^= flat[key][1]
        assert covered == set(dets)
        assert acc_mask == mask


def brute_force_min_weight_decode(dem: DetectorErrorModel):
    """Dijkstra over syndrome space: exact minimum-weight error coset."""
    weights = [math.log((1 - p) / p) for p, _, _ in dem.mechanisms]
    dist = {0: (0.0, 0)}
    pq = [(0.0, 0, 0)]
    while pq:
        d, syn, msk = heapq.heappop(pq)
        if dist.get(syn, (None,))[0] != d:
            continue
        for (p, dets, m), w in zip(dem.mechanisms, weights):
            syn2 = syn
            for dd in dets:
                syn2 ^= 1 << dd
            nd = d + w
            if syn2 not in dist or nd < dist[syn2][0] - 1e-12:
                dist[syn2] = (nd, msk ^ m)
                heapq.heappush(pq, (nd, syn2, msk ^ m))
    return dist


def test_repetition_code_matches_brute_force_coset():
    sched = make_schedule(build_repetition(3))
    exp = compile_monolithic(sched, NoiseParams(p=0.01), rounds=2, pad=1)
    dem = build_dem(exp)
    g = to_matching_graph(dem)
    assert any(s.has_boundary for s in g.sectors)
    n_det = exp.program.num_detectors
    table = brute_force_min_weight_decode(dem)
    n_checked = 0
    for syn, (w, mask) in sorted(table.items()):
        dets = [d for d in range(n_det) if syn >> d & 1]
        out = syndrome_outcomes(n_det, dets, k=exp.k)
        pred = int(mwpm_decode(g, out)[0])
        assert pred == mask, (dets, pred, mask)
        n_checked += 1
    assert n_checked == 2 ** (n_det - 4)  # reachable syndromes


def test_single_mechanism_decoding_is_exact():
    """Every individual DEM mechanism decodes back to its own mask."""
    sched = make_schedule(build_toric(4))
    exp = compile_monolithic(sched, NoiseParams(p=1e-3), rounds=3, pad=1)
    dem = build_dem(exp)
    g = to_matching_graph(dem)
    n_det = exp.program.num_detectors
    for p, dets, mask in dem.mechanisms:
        out = syndrome_outcomes(n_det, dets, k=exp.k)
        assert int(mwpm_decode(g, out)[0]) == mask


def test_blossom_equals_brute_force_on_random_graphs():
    rng = np.random.default_rng(2024)
    for trial in range(300):
        n = 2 * int(rng.integers(1, 7))
        w = rng.uniform(0.05, 10.0, size=(n, n))
        w = (w + w.T) / 2
        np.fill_diagonal(w, 0)
        match = min_weight_perfect_matching(w)
        got = sum(w[i, match[i]] for i in range(n)) / 2
        best = min(
            sum(w[a, b] for a, b in pairing)
            for pairing in _pairings(list(range(n))))
        assert got == pytest.approx(best, rel=1e-6)


def _pairings(vs):
    if not vs:
        yield []
        return
    a = vs[0]
    for i in range(1, len(vs)):
        for rest in _pairings(vs[1:i] + vs[i + 1:]):
            yield [(a, vs[i])] + rest


def test_blossom_matches_networkx_medium():
    nx = pytest.importorskip("networkx")
    rng = np.random.default_rng(5)
    for trial in range(20):
        n = 2 * int(rng.integers(8, 16))
        w = rng.uniform(0.1, 5.0, size=(n, n))
        w = (w + w.T) / 2
        np.fill_diagonal(w, 0)
        match = min_weight_perfect_matching(w)
        got = sum(w[i, match[i]] for i in range(n)) / 2
        G = nx.Graph()
        for i in range(n):
            for j in range(i + 1, n):
                G.add_edge(i, j, weight=w[i, j])
        ref = nx.min_weight_matching(G)
        want = sum(w[a, b] for a, b in ref)
        assert got == pytest.approx(want, rel=1e-9)


def test_mwpm_trivial_cases():
    dem = DetectorErrorModel(2, 1, [(0.01, (0, 1), 0)])
    g = to_matching_graph(dem)
    # empty syndrome -> zero mask
    out = syndrome_outcomes(2, [], k=1)
    assert int(mwpm_decode(g, out)[0]) == 0
    # two defects joined by the only edge -> its (zero) mask
    out = syndrome_outcomes(2, [0, 1], k=1)
    assert int(mwpm_decode(g, out)[0]) == 0
    # odd parity in a boundary-less sector is an error
    out = syndrome_outcomes(2, [0], k=1)
    with pytest.raises(ValueError, match="odd"):
        mwpm_decode(g, out)


def test_mwpm_picks_lighter_path():
    # triangle-ish: direct heavy edge vs two light edges through detector 2
    dem = DetectorErrorModel(3, 1, [
        (0.0001, (0, 1), 1),   # heavy direct edge carries the logical
        (0.2, (0, 2), 0),
        (0.2, (1, 2), 0),
    ])
    g = to_matching_graph(dem)
    out = syndrome_outcomes(3, [0, 1], k=1)
    # the two-light-edge path has weight 2*ln(4) < ln(9999); logical mask 0
    assert int(mwpm_decode(g, out)[0]) == 0


def test_score_predictions_examples():
    bits = np.zeros((2, 3), dtype=np.uint8)
    bits[1, 1] = 1  # shot 1 flips observable 1
    obs = np.packbits(bits, axis=1, bitorder="little")
    out = ShotOutcomes(3, np.zeros((0, 1), dtype=np.uint8), obs)
    preds = np.zeros(3, dtype=np.uint64)
    sc = score_predictions(preds, out)
    assert sc["errors_any"] == 1 and sc["errors_per_obs"] == [0, 1]
    # perfect predictions -> zero errors
    preds2 = preds.copy()
    preds2[1] = 2
    assert score_predictions(preds2, out)["errors_any"] == 0


def test_random_vs_random_error_rate():
    rng = np.random.default_rng(3)
    shots = 100_000
    actual = rng.integers(0, 4, size=shots).astype(np.uint64)
    preds = rng.integers(0, 4, size=shots).astype(np.uint64)
    bits = np.zeros((2, shots), dtype=np.uint8)
    bits[0] = (actual & 1).astype(np.uint8)
    bits[1] = ((actual >> np.uint64(1)) & np.uint64(1)).astype(np.uint8)
    out = ShotOutcomes(shots, np.zeros((0, (shots + 7) // 8), dtype=np.uint8),
                       np.packbits(bits, axis=1, bitorder="little"))
    sc = score_predictions(preds, out)
    rate = sc["errors_any"] / shots
    assert abs(rate - 0.75) < 5 * math.sqrt(0.75 * 0.25 / shots)


def test_dem_text_round_trip():
    dem = DetectorErrorModel(8, 2, [(0.01, (0, 3), 1), (0.2, (5,), 2)])
    text = write_dem(dem)
    assert "error(0.01) D0 D3 L0" in text
    again = parse_dem(text)
    assert again.mechanisms == dem.mechanisms


def test_decode_sampled_low_p_no_logical_errors():
    """At p -> 0 every sampled shot carries at most one mechanism and must
    decode cleanly (distributed d=4 included)."""
    from distqec.partition import (build_connectivity_graph, make_layout,
                                   spectral_partition)
    sched = make_schedule(build_toric(4))
    exp = compile_monolithic(sched, NoiseParams(p=1e-5), rounds=4, pad=2)
    dem = build_dem(exp)
    g = to_matching_graph(dem)
    out = sample_frames(exp, 10_000, seed=6)
    sc = score_predictions(mwpm_decode(g, out), out)
    assert sc["errors_any"] == 0
