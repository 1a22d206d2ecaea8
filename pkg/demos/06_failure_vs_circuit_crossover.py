"""Where node failure stops mattering: the crossover.

Sweep p with node failure locked to a fixed fraction of it.  Circuit noise
scales steeply below threshold while the failure-only logical rate falls
roughly linearly, so the two curves cross; above the crossing, circuit
noise dominates and node failure is effectively free.

Desk scale: toric d=4 at n_q=16 with node failure at p/3 so a
laptop-sized run resolves both curves.  The acceptance suite runs the
d=6, n_q=48, p/100 version of this experiment.
"""

from distqec import ExperimentConfig, run_experiment, rows_to_csv, write_svg

GRID = [5e-5, 1e-4, 2e-4, 4e-4]
rows = []
for label, dropout, pcf in (("circuit-only", "none", 1.0),
                            ("failure-only", "p/3", 0.0)):
    cfg = ExperimentConfig(code="toric", d=4, n_q=16, mode="memory",
                           p_grid=GRID, dropout=dropout, p_circ_factor=pcf,
                           rounds=16, max_shots=150_000, target_errors=200,
                           batch=20_000, seed=11, workers=2)
    got = run_experiment(cfg)
    rows += got
    print(f"{label}: " + ", ".join(f"p={r.p:.1e}: {r.P_L:.2e}" for r in got))

circ = [r for r in rows if r.p_dropout == 0.0]
fail = [r for r in rows if r.p_dropout > 0.0]
for c, f in zip(circ, fail):
    side = "circuit noise dominates" if c.P_L > f.P_L else "node failure dominates"
    print(f"p={c.p:.1e}: {side}")

write_svg("crossover.svg", rows,
          title="toric d=4, n_q=16: circuit-only vs node-failure-only")
print("wrote crossover.svg")
