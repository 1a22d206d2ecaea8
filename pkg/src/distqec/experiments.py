"""Monte Carlo campaign orchestration.

Runs (code, n_q, p, p_dropout) grids through compile -> sample -> decode ->
score, with adaptive stopping, bootstrap confidence intervals, CSV
emission, analytic monolithic-floor evaluation, and weighted combination
of monolithic failure ensembles.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .codes import (build_honeycomb, build_repetition, build_toric,
                    load_floquet_lattice, make_schedule)
from .compile import (CompiledExperiment, NoiseParams,
                      attach_node_dropout, compile_memory,
                      compile_monolithic, compile_monolithic_ensemble,
                      compile_swapout)
from .decode import build_dem, mwpm_decode, score_predictions, to_matching_graph
from .partition import (Partition, build_connectivity_graph, make_layout,
                        spectral_partition)
from .sim import FrameSampler

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "run_experiment",
    "bootstrap_ci",
    "analytic_floor",
    "combine_ensemble",
    "rows_to_csv",
    "write_svg",
    "CSV_COLUMNS",
]


@dataclass
class ExperimentConfig:
    code: str = "toric"              # toric | honeycomb | repetition | lattice
    d: int = 4                       # toric/repetition distance
    a: int = 2                       # honeycomb cell counts
    b: int = 2
    lattice_file: str | None = None
    n_q: int = 16                    # cluster size cap (distributed modes)
    mode: str = "memory"             # memory | swapout | monolithic | monolithic-ensemble
    p_grid: list = field(default_factory=lambda: [1e-3])
    dropout: str | float = "none"    # none | p/100 | fixed value
    p_circ_factor: float = 1.0       # 0.0 isolates node failure from circuit noise
    p_nl_ratio: float = 10.0
    e: int = 512
    rounds: int = 32
    pad: int = 2
    swap_after_round: int = 16
    max_shots: int = 100_000
    target_errors: int = 100
    batch: int = 20_000
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.p_grid:
            raise ValueError("noise grid must be nonempty")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.mode in ("memory", "swapout") and self.n_q < 2:
            raise ValueError("distributed modes need n_q >= 2")

    def dropout_for(self, p: float) -> float:
        if self.dropout == "none":
            return 0.0
        if isinstance(self.dropout, str) and self.dropout.startswith("p/"):
            return p / float(self.dropout[2:])
        return float(self.dropout)

    def code_label(self) -> str:
        if self.code == "toric":
            return f"toric-d{self.d}"
        if self.code == "repetition":
            return f"repetition-d{self.d}"
        if self.code == "honeycomb":
            return f"honeycomb-{self.a}x{self.b}"
        return self.lattice_file or "lattice"

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        return ExperimentConfig(**json.loads(text))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


@dataclass
class ResultRow:
    mode: str
    code: str
    d_or_lattice: str
    n_q: int
    p: float
    p_dropout: float
    rounds: int
    shots: int
    errors_any: int
    errors_per_obs: list
    P_L: float
    ci_low: float
    ci_high: float
    seed: int
    wall_ms: int
    extra: dict = field(default_factory=dict)  # not part of the CSV schema


CSV_COLUMNS = ["mode", "code", "d_or_lattice", "n_q", "p", "p_dropout",
               "rounds", "shots", "errors_any", "errors_per_obs", "P_L",
               "ci_low", "ci_high", "seed", "wall_ms"]


# -- statistics --------------------------------------------------------------------


def bootstrap_ci(errors, shots: int | None = None, level: float = 0.999,
                 resamples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval for a binomial rate.

    ``errors`` is either a 0/1 per-shot vector or an error count (then
    ``shots`` is required).  All-zero inputs get a rule-of-three guard on
    the upper limit."""
    if not (0.0 < level < 1.0):
        raise ValueError("confidence level must be in (0, 1)")
    if shots is None:
        vec = np.asarray(errors)
        count = int(vec.sum())
        shots = int(vec.size)
    else:
        count = int(errors)
    if shots < 1:
        raise ValueError("need at least one shot")
    rate = count / shots
    rng = np.random.Generator(np.random.Philox(key=[seed, 0xB007]))
    draws = rng.binomial(shots, rate, size=resamples) / shots
    alpha = 1.0 - level
    low = float(np.quantile(draws, alpha / 2))
    high = float(np.quantile(draws, 1.0 - alpha / 2))
    if count == 0:
        high = max(high, -math.log(alpha) / shots)
        low = 0.0
    return low, high


def analytic_floor(p_dropout: float, r: int, k: int | None = None) -> float:
    """Probability of at least one whole-node failure over r rounds; with k
    given, scaled by the chance a randomized logical register differs."""
    if not (0.0 <= p_dropout <= 1.0) or r < 0:
        raise ValueError("bad floor arguments")
    val = 1.0 - (1.0 - p_dropout) ** r
    if k is not None:
        val *= 1.0 - 2.0 ** (-k)
    return val


def combine_ensemble(members, resamples: int = 10_000,
                     seed: int = 0) -> ResultRow:
    """Weighted combination of per-member results.

    members: [(weight, ResultRow)].  Weights are normalized; the residual
    (1 - sum of raw weights) is the unsimulated multi-failure mass and is
    reported in the combined row's per-observable slot metadata."""
    if not members:
        raise ValueError("empty ensemble")
    raw = sum(w for w, _ in members)
    if raw <= 0:
        raise ValueError("ensemble weights must be positive")
    residual = 1.0 - raw
    p_comb = sum(w * row.P_L for w, row in members) / raw
    rng = np.random.Generator(np.random.Philox(key=[seed, 0xC0B]))
    acc = np.zeros(resamples)
    for w, row in members:
        rate = row.errors_any / row.shots if row.shots else 0.0
        acc += (w / raw) * rng.binomial(row.shots, rate, size=resamples) / max(row.shots, 1)
    alpha = 1.0 - 0.999
    lo = float(np.quantile(acc, alpha / 2))
    hi = float(np.quantile(acc, 1 - alpha / 2))
    first = members[0][1]
    shots = sum(row.shots for _, row in members)
    errs = sum(row.errors_any for _, row in members)
    per_obs = [0] * len(first.errors_per_obs)
    for _, row in members:
        for i, v in enumerate(row.errors_per_obs):
            per_obs[i] += v
    return ResultRow(
        mode="monolithic-ensemble", code=first.code,
        d_or_lattice=first.d_or_lattice, n_q=first.n_q, p=first.p,
        p_dropout=first.p_dropout, rounds=first.rounds, shots=shots,
        errors_any=errs, errors_per_obs=per_obs, P_L=p_comb,
        ci_low=lo, ci_high=hi, seed=first.seed,
        wall_ms=sum(row.wall_ms for _, row in members),
        extra={"residual_weight": residual,
               "normalized": abs(raw - 1.0) > 1e-12},
    )


# -- building blocks -----------------------------------------------------------------


def build_code(cfg: ExperimentConfig):
    if cfg.code == "toric":
        return build_toric(cfg.d)
    if cfg.code == "repetition":
        return build_repetition(cfg.d)
    if cfg.code == "honeycomb":
        return build_honeycomb(cfg.a, cfg.b)
    if cfg.code == "lattice":
        with open(cfg.lattice_file) as f:
            return load_floquet_lattice(f.read())
    raise ValueError(f"unknown code family {cfg.code!r}")


def _layout_for(cfg: ExperimentConfig, schedule):
    graph = build_connectivity_graph(schedule)
    part = spectral_partition(graph, cfg.n_q, seed=cfg.seed)
    return make_layout(part, schedule, cfg.n_q)


def _monolithic_partition(schedule) -> Partition:
    qs = list(range(schedule.n_qubits))
    return Partition({q: 0 for q in qs}, [qs])


def _compile_point(cfg: ExperimentConfig, schedule, layout, p: float,
                   p_drop: float):
    noise = NoiseParams(p=p * cfg.p_circ_factor, p_nl_ratio=cfg.p_nl_ratio,
                        p_dropout=p_drop, e=cfg.e)
    if cfg.mode == "memory":
        exp = compile_memory(schedule, layout, noise, rounds=cfg.rounds,
                             pad=cfg.pad, seed=cfg.seed)
        if p_drop > 0:
            exp = attach_node_dropout(exp, layout, noise, seed=cfg.seed)
        return exp
    if cfg.mode == "swapout":
        exp = compile_swapout(schedule, layout, noise, rounds=cfg.rounds,
                              pad=cfg.pad,
                              swap_after_round=cfg.swap_after_round,
                              seed=cfg.seed)
        if p_drop > 0:
            exp = attach_node_dropout(exp, layout, noise, seed=cfg.seed)
        return exp
    if cfg.mode == "monolithic":
        exp = compile_monolithic(schedule, noise, rounds=cfg.rounds,
                                 pad=cfg.pad, seed=cfg.seed)
        if p_drop > 0:
            exp = attach_node_dropout(exp, _wrap_mono_layout(schedule), noise,
                                      seed=cfg.seed)
        return exp
    raise ValueError(f"mode {cfg.mode!r} is not a single-circuit mode")


def _wrap_mono_layout(schedule):
    from .partition import NetworkLayout
    part = _monolithic_partition(schedule)
    return NetworkLayout(part, schedule.n_qubits,
                         qpi_count=0, nonlocal_checks={}, bell_demand={},
                         comm_qubits={})


def _decode_graph(cfg: ExperimentConfig, schedule, layout, p: float,
                  exp: CompiledExperiment):
    """Matching graph for decoding.  When the sampled circuit is free of
    circuit noise (node-failure-only sweeps), the decoder graph is built
    from the same structure compiled at the grid's p, since an empty model
    cannot weight any matching."""
    if exp.noise.p > 0:
        dem = build_dem(exp)
        return dem, to_matching_graph(dem)
    ref_noise = NoiseParams(p=p, p_nl_ratio=cfg.p_nl_ratio)
    if cfg.mode == "monolithic":
        ref = compile_monolithic(schedule, ref_noise, rounds=cfg.rounds,
                                 pad=cfg.pad, seed=cfg.seed)
    elif cfg.mode == "swapout":
        ref = compile_swapout(schedule, layout, ref_noise, rounds=cfg.rounds,
                              pad=cfg.pad,
                              swap_after_round=cfg.swap_after_round,
                              seed=cfg.seed)
    else:
        ref = compile_memory(schedule, layout, ref_noise, rounds=cfg.rounds,
                             pad=cfg.pad, seed=cfg.seed)
    dem = build_dem(ref)
    return dem, to_matching_graph(dem)


def _sample_decode_loop(cfg: ExperimentConfig, exp: CompiledExperiment,
                        graph, point_index: int) -> tuple[int, int, list]:
    sampler = FrameSampler(exp.program)
    shots_done = 0
    errors_any = 0
    per_obs = [0] * exp.k
    chunk_index = 0
    while shots_done < cfg.max_shots and errors_any < cfg.target_errors:
        n = min(cfg.batch, cfg.max_shots - shots_done)
        seed = (cfg.seed * 1_000_003 + point_index) * 1_000_003 + chunk_index
        out = sampler.sample(n, seed=seed)
        preds = mwpm_decode(graph, out)
        sc = score_predictions(preds, out)
        shots_done += n
        errors_any += sc["errors_any"]
        for i, v in enumerate(sc["errors_per_obs"]):
            per_obs[i] += v
        chunk_index += 1
    return shots_done, errors_any, per_obs


def _run_point(args) -> ResultRow:
    cfg_dict, point_index, p = args
    cfg = ExperimentConfig(**cfg_dict)
    t0 = time.time()
    code = build_code(cfg)
    schedule = make_schedule(code)
    layout = None
    if cfg.mode in ("memory", "swapout"):
        layout = _layout_for(cfg, schedule)
    p_drop = cfg.dropout_for(p)
    exp = _compile_point(cfg, schedule, layout, p, p_drop)
    _, graph = _decode_graph(cfg, schedule, layout, p, exp)
    shots, errors_any, per_obs = _sample_decode_loop(cfg, exp, graph,
                                                     point_index)
    lo, hi = bootstrap_ci(errors_any, shots, seed=cfg.seed + point_index)
    return ResultRow(
        mode=cfg.mode, code=cfg.code, d_or_lattice=cfg.code_label(),
        n_q=cfg.n_q if cfg.mode in ("memory", "swapout") else 0,
        p=p, p_dropout=p_drop, rounds=cfg.rounds, shots=shots,
        errors_any=errors_any, errors_per_obs=per_obs,
        P_L=errors_any / shots, ci_low=lo, ci_high=hi, seed=cfg.seed,
        wall_ms=int((time.time() - t0) * 1000),
    )


def _ensemble_member_batch(args) -> list:
    """Worker: simulate a slice of ensemble members, sharing one decoder
    graph built from the no-failure circuit (failure channels are hidden
    from the decoder anyway)."""
    cfg_dict, point_index, p, member_slice = args
    cfg = ExperimentConfig(**cfg_dict)
    code = build_code(cfg)
    schedule = make_schedule(code)
    p_drop = cfg.dropout_for(p)
    noise = NoiseParams(p=p * cfg.p_circ_factor, p_nl_ratio=cfg.p_nl_ratio,
                        p_dropout=p_drop, e=cfg.e)
    members = compile_monolithic_ensemble(schedule, noise, rounds=cfg.rounds,
                                          pad=cfg.pad, seed=cfg.seed)
    _, graph = _decode_graph(cfg, schedule, None, p, members[0][1])
    out = []
    for mi in member_slice:
        t0 = time.time()
        w, exp = members[mi]
        shots, errors_any, per_obs = _sample_decode_loop(
            cfg, exp, graph, point_index * 1009 + mi)
        lo, hi = bootstrap_ci(errors_any, shots, seed=cfg.seed + mi)
        out.append((mi, w, ResultRow(
            mode="monolithic-ensemble-member", code=cfg.code,
            d_or_lattice=cfg.code_label(), n_q=0, p=p, p_dropout=p_drop,
            rounds=cfg.rounds, shots=shots, errors_any=errors_any,
            errors_per_obs=per_obs, P_L=errors_any / shots, ci_low=lo,
            ci_high=hi, seed=cfg.seed,
            wall_ms=int((time.time() - t0) * 1000))))
    return out


def run_ensemble(cfg: ExperimentConfig, p: float, point_index: int = 0):
    """Simulate the whole failure ensemble at one grid point; returns
    (member rows with weights, combined row)."""
    cfg_dict = asdict(cfg)
    n_members = cfg.rounds + 1
    if cfg.workers > 1:
        slices = [list(range(w, n_members, cfg.workers))
                  for w in range(cfg.workers)]
        args = [(cfg_dict, point_index, p, s) for s in slices if s]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_ensemble_member_batch, args))
        flat = [item for part in parts for item in part]
    else:
        flat = _ensemble_member_batch((cfg_dict, point_index, p,
                                       list(range(n_members))))
    flat.sort()
    members = [(w, row) for _, w, row in flat]
    combined = combine_ensemble(members, seed=cfg.seed + point_index)
    return members, combined


def _run_ensemble_point(args) -> ResultRow:
    cfg_dict, point_index, p = args
    cfg = ExperimentConfig(**cfg_dict)
    _, combined = run_ensemble(cfg, p, point_index)
    return combined


def run_experiment(cfg: ExperimentConfig, csv_path: str | None = None):
    """Run every grid point; returns the rows (ensemble mode returns the
    combined row per point).  Failures at individual points are collected
    and re-raised after the surviving rows are written."""
    cfg_dict = asdict(cfg)
    worker = _run_ensemble_point if cfg.mode == "monolithic-ensemble" else _run_point
    args = [(cfg_dict, i, p) for i, p in enumerate(cfg.p_grid)]
    rows = []
    failures = []
    # ensemble points parallelize internally over members
    use_pool = (cfg.workers > 1 and len(args) > 1
                and cfg.mode != "monolithic-ensemble")
    if use_pool:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futs = [pool.submit(worker, a) for a in args]
            for a, fut in zip(args, futs):
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    failures.append((a[2], exc))
    else:
        for a in args:
            try:
                rows.append(worker(a))
            except Exception as exc:  # propagate with grid context at the end
                failures.append((a[2], exc))
    if csv_path:
        with open(csv_path, "w") as f:
            f.write(rows_to_csv(rows))
    if failures:
        msgs = "; ".join(f"p={p}: {e}" for p, e in failures)
        raise RuntimeError(f"grid points failed ({msgs}); partial results kept")
    return rows


# -- output -------------------------------------------------------------------------


def rows_to_csv(rows, include_wall: bool = True) -> str:
    cols = CSV_COLUMNS if include_wall else CSV_COLUMNS[:-1]
    out = [",".join(cols)]
    for r in rows:
        vals = []
        for c in cols:
            v = getattr(r, c)
            if c == "errors_per_obs":
                vals.append("|".join(repr(x) if isinstance(x, float) else str(x)
                                     for x in v))
            elif isinstance(v, float):
                vals.append(repr(v))
            else:
                vals.append(str(v))
        out.append(",".join(vals))
    return "\n".join(out) + "\n"


def write_svg(path: str, rows, title: str = "logical error rate") -> None:
    """Static log-log scatter of P_L vs p with CI whiskers, one polyline
    per (mode, code) series.  Plain SVG, no plotting dependency."""
    series: dict = {}
    for r in rows:
        if r.P_L <= 0 or r.p <= 0:
            continue
        series.setdefault((r.mode, r.d_or_lattice), []).append(r)
    W, H, M = 640, 460, 60
    xs = [r.p for rs in series.values() for r in rs]
    ys = [max(r.P_L, 1e-9) for rs in series.values() for r in rs]
    ys += [max(r.ci_high, 1e-9) for rs in series.values() for r in rs]
    if not xs:
        with open(path, "w") as f:
            f.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}"/>')
        return
    lx0, lx1 = math.log10(min(xs)) - 0.1, math.log10(max(xs)) + 0.1
    ly0, ly1 = math.log10(min(ys)) - 0.2, math.log10(max(ys)) + 0.2

    def X(p):
        return M + (math.log10(p) - lx0) / (lx1 - lx0) * (W - 2 * M)

    def Y(q):
        return H - M - (math.log10(max(q, 1e-9)) - ly0) / (ly1 - ly0) * (H - 2 * M)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
             f'font-family="sans-serif" font-size="11">',
             f'<text x="{W/2}" y="18" text-anchor="middle">{title}</text>',
             f'<rect x="{M}" y="{M}" width="{W-2*M}" height="{H-2*M}" '
             f'fill="none" stroke="#999"/>']
    for di in range(math.ceil(lx0), math.floor(lx1) + 1):
        x = X(10 ** di)
        parts.append(f'<line x1="{x:.1f}" y1="{M}" x2="{x:.1f}" y2="{H-M}" '
                     f'stroke="#eee"/>')
        parts.append(f'<text x="{x:.1f}" y="{H-M+16}" text-anchor="middle">'
                     f'1e{di}</text>')
    for di in range(math.ceil(ly0), math.floor(ly1) + 1):
        y = Y(10 ** di)
        parts.append(f'<line x1="{M}" y1="{y:.1f}" x2="{W-M}" y2="{y:.1f}" '
                     f'stroke="#eee"/>')
        parts.append(f'<text x="{M-6}" y="{y:.1f}" text-anchor="end">1e{di}</text>')
    for si, (key, rs) in enumerate(sorted(series.items())):
        c = colors[si % len(colors)]
        rs = sorted(rs, key=lambda r: r.p)
        pts = " ".join(f"{X(r.p):.1f},{Y(r.P_L):.1f}" for r in rs)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
        for r in rs:
            x = X(r.p)
            parts.append(f'<line x1="{x:.1f}" y1="{Y(max(r.ci_low,1e-9)):.1f}" '
                         f'x2="{x:.1f}" y2="{Y(max(r.ci_high,1e-9)):.1f}" '
                         f'stroke="{c}"/>')
            parts.append(f'<circle cx="{x:.1f}" cy="{Y(r.P_L):.1f}" r="3" '
                         f'fill="{c}"/>')
        parts.append(f'<text x="{W-M+4}" y="{M+14*si+10}" fill="{c}">'
                     f'{key[0]} {key[1]}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts))
