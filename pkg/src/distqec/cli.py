"""Command-line front end.

Subcommands: build-code, partition, compile, sample, decode, run, floor.
All inputs are explicit; no environment variables are consulted.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .circuit import parse_program, serialize_program
from .codes import (build_honeycomb, build_repetition, build_toric,
                    export_floquet_lattice, load_floquet_lattice,
                    make_schedule)
from .compile import (NoiseParams, attach_node_dropout, compile_memory,
                      compile_monolithic, compile_swapout)
from .decode import build_dem, mwpm_decode, score_predictions, write_dem, to_matching_graph
from .experiments import (ExperimentConfig, analytic_floor, bootstrap_ci,
                          rows_to_csv, run_experiment, write_svg)
from .partition import (build_connectivity_graph, make_layout,
                        spectral_partition)
from .sim import FrameSampler, read_outcomes, write_outcomes


def _add_code_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--code", default="toric",
                   choices=["toric", "honeycomb", "repetition", "lattice"])
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--a", type=int, default=2)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--lattice-file")


def _build_code(args):
    if args.code == "toric":
        return build_toric(args.d)
    if args.code == "repetition":
        return build_repetition(args.d)
    if args.code == "honeycomb":
        return build_honeycomb(args.a, args.b)
    with open(args.lattice_file) as f:
        return load_floquet_lattice(f.read())


def cmd_build_code(args) -> int:
    code = _build_code(args)
    sched = make_schedule(code)
    if hasattr(code, "stabilizers"):
        print(f"{code.name}: [[{code.n},{code.k},{code.d}]], "
              f"{len(code.stabilizers)} stabilizers, "
              f"{len(sched.checks)} checks/round")
    else:
        print(f"{code.name}: {code.n_vertices} qubits, {len(code.edges)} edges, "
              f"genus {code.genus}, k={code.k}, period {sched.period}")
        if args.out:
            with open(args.out, "w") as f:
                f.write(export_floquet_lattice(code))
            print(f"lattice written to {args.out}")
    return 0


def cmd_partition(args) -> int:
    code = _build_code(args)
    sched = make_schedule(code)
    graph = build_connectivity_graph(sched)
    part = spectral_partition(graph, args.nq, seed=args.seed)
    lay = make_layout(part, sched, args.nq)
    doc = {
        "n_q": args.nq,
        "qpi": lay.qpi_count,
        "clusters": [sorted(c) for c in part.clusters],
        "cluster_of": [part.cluster_of[q] for q in range(graph.n_vertices)],
        "nonlocal_checks": len(lay.nonlocal_checks),
    }
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        print(text)
    return 0


def cmd_compile(args) -> int:
    code = _build_code(args)
    sched = make_schedule(code)
    noise = NoiseParams(p=args.p, p_dropout=args.pdropout,
                        p_nl_ratio=args.pnl_ratio, e=args.e)
    if args.monolithic:
        exp = compile_monolithic(sched, noise, rounds=args.rounds,
                                 pad=args.pad, seed=args.seed)
        layout = None
    else:
        graph = build_connectivity_graph(sched)
        part = spectral_partition(graph, args.nq, seed=args.seed)
        layout = make_layout(part, sched, args.nq)
        if args.swapout is not None:
            exp = compile_swapout(sched, layout, noise, rounds=args.rounds,
                                  pad=args.pad, swap_after_round=args.swapout,
                                  seed=args.seed)
        else:
            exp = compile_memory(sched, layout, noise, rounds=args.rounds,
                                 pad=args.pad, seed=args.seed)
        if args.pdropout > 0:
            exp = attach_node_dropout(exp, layout, noise, seed=args.seed)
    with open(args.out, "w") as f:
        f.write(serialize_program(exp.program))
    meta = {
        "code": args.code, "d": args.d, "n_q": None if args.monolithic else args.nq,
        "p": args.p, "p_dropout": args.pdropout, "rounds": args.rounds,
        "pad": args.pad, "seed": args.seed, "k": exp.k,
        "round_ends": exp.round_ends,
        "dropout_channels": len(exp.dropout_channel_indices),
        "mode": exp.metadata.get("mode"),
    }
    sidecar = args.meta or (args.out + ".json")
    with open(sidecar, "w") as f:
        json.dump(meta, f, indent=1)
    print(f"wrote {args.out} ({len(exp.program.instructions)} instructions) "
          f"and {sidecar}")
    return 0


def cmd_sample(args) -> int:
    with open(args.circuit) as f:
        prog = parse_program(f.read())
    out = FrameSampler(prog).sample(args.shots, seed=args.seed)
    write_outcomes(args.out, out)
    print(f"wrote {args.out}: {out.shots} shots, {out.num_detectors} detectors, "
          f"{out.num_observables} observables")
    return 0


def cmd_decode(args) -> int:
    with open(args.circuit) as f:
        prog = parse_program(f.read())
    outcomes = read_outcomes(args.outcomes)
    dem = build_dem(prog)
    if args.dem_out:
        with open(args.dem_out, "w") as f:
            f.write(write_dem(dem))
    graph = to_matching_graph(dem)
    preds = mwpm_decode(graph, outcomes)
    sc = score_predictions(preds, outcomes)
    lo, hi = bootstrap_ci(sc["errors_any"], sc["shots"])
    print(f"shots={sc['shots']} errors_any={sc['errors_any']} "
          f"per_obs={sc['errors_per_obs']} "
          f"P_L={sc['errors_any']/sc['shots']:.6g} "
          f"ci99.9=({lo:.3g},{hi:.3g})")
    return 0


def cmd_run(args) -> int:
    with open(args.config) as f:
        cfg = ExperimentConfig.from_json(f.read())
    rows = run_experiment(cfg, csv_path=args.csv)
    if args.svg:
        write_svg(args.svg, rows)
    print(rows_to_csv(rows), end="")
    return 0


def cmd_floor(args) -> int:
    val = analytic_floor(args.pdropout, args.rounds, args.k)
    print(f"{val:.6e}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="distqec",
                                 description="distributed QEC memory simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("build-code", help="construct and summarize a code")
    _add_code_args(p)
    p.add_argument("--out", help="write a Floquet lattice document")
    p.set_defaults(fn=cmd_build_code)

    p = sub.add_parser("partition", help="spectral partition of a code")
    _add_code_args(p)
    p.add_argument("--nq", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_partition)

    p = sub.add_parser("compile", help="compile a memory experiment")
    _add_code_args(p)
    p.add_argument("--nq", type=int, default=16)
    p.add_argument("--p", type=float, default=1e-3)
    p.add_argument("--pdropout", type=float, default=0.0)
    p.add_argument("--pnl-ratio", type=float, default=10.0)
    p.add_argument("--e", type=int, default=512)
    p.add_argument("--rounds", type=int, default=32)
    p.add_argument("--pad", type=int, default=2)
    p.add_argument("--swapout", type=int, default=None,
                   help="swap out the largest node after this round")
    p.add_argument("--monolithic", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--meta")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("sample", help="frame-sample a compiled circuit")
    p.add_argument("--circuit", required=True)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("decode", help="decode sampled outcomes")
    p.add_argument("--circuit", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--dem-out")
    p.set_defaults(fn=cmd_decode)

    p = sub.add_parser("run", help="run an experiment grid from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--svg")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("floor", help="analytic monolithic failure floor")
    p.add_argument("--pdropout", type=float, required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(fn=cmd_floor)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
