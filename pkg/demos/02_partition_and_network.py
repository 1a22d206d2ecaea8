"""Cut a code onto a network of small QPUs and inspect the layout.

Each data and ancilla qubit becomes a vertex of the interaction graph;
recursive spectral bisection caps every cluster at n_q qubits.  Checks
spanning clusters are mediated by shared entanglement: one Bell pair for
two clusters, an N-qubit GHZ state (fused from N-1 Bell pairs) beyond.
"""

from collections import Counter

from distqec import (build_connectivity_graph, build_toric, make_layout,
                     make_schedule, spectral_partition)

code = build_toric(6)
sched = make_schedule(code)
graph = build_connectivity_graph(sched)
print(f"{code.name}: interaction graph has {graph.n_vertices} vertices "
      f"({sched.n_data} data + {sched.n_anc} ancilla), {len(graph.edges)} edges")

for n_q in (48, 16):
    part = spectral_partition(graph, n_q, seed=11)
    lay = make_layout(part, sched, n_q)
    sizes = Counter(len(c) for c in part.clusters)
    med = Counter(info.mediation for info in lay.nonlocal_checks.values())
    per_round = sum(info.n_bells for info in lay.nonlocal_checks.values())
    print(f"\nn_q={n_q}: {len(part.clusters)} QPUs "
          f"(sizes {dict(sizes)}), {lay.qpi_count} QPIs each")
    print(f"  nonlocal checks: {len(lay.nonlocal_checks)} of "
          f"{len(sched.checks)} ({dict(med)})")
    print(f"  Bell pairs consumed per round: {per_round}")
    peak = max(Counter({c: v for (t, c), v in lay.bell_demand.items()}).values())
    print(f"  peak per-cluster Bell demand per round: {peak} "
          f"(batched {lay.qpi_count} at a time)")
