"""distqec: Monte Carlo simulation of quantum error correction distributed
over networks of small quantum processors.

The pipeline: build a code (`codes`), cut it onto QPUs (`partition`),
compile a noisy circuit with entanglement gadgets, node swap-out, or
whole-node failure (`compile`), sample it (`sim`), decode with exact
minimum-weight perfect matching (`decode`), and orchestrate campaigns with
bootstrap confidence intervals (`experiments`).
"""

from .circuit import (CircuitProgram, Instruction, PauliTerm, RecordRef,
                      count_resources, parse_program, serialize_program,
                      validate_program)
from .codes import (FloquetLattice, ObservableSpec, ScheduleTemplate,
                    StabilizerCode, build_honeycomb, build_repetition,
                    build_toric, export_floquet_lattice,
                    load_floquet_lattice, make_schedule, measurement_plan)
from .compile import (CompiledExperiment, NoiseParams, TimingModel,
                      attach_node_dropout, compile_memory,
                      compile_monolithic, compile_monolithic_ensemble,
                      compile_swapout)
from .decode import (DetectorErrorModel, MatchingGraph, build_dem,
                     mwpm_decode, parse_dem, score_predictions,
                     to_matching_graph, write_dem)
from .experiments import (ExperimentConfig, ResultRow, analytic_floor,
                          bootstrap_ci, combine_ensemble, rows_to_csv,
                          run_experiment, write_svg)
from .partition import (ConnectivityGraph, NetworkLayout, Partition,
                        build_connectivity_graph, make_layout,
                        select_largest_node, spectral_partition)
from .sim import (FrameSampler, ShotOutcomes, oracle_sample, propagate_pauli,
                  read_outcomes, sample_error_pattern, sample_frames,
                  write_outcomes)

__version__ = "0.1.0"
