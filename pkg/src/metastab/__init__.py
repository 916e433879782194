"""Metastability analysis of finite continuous-time Markov chains.

Exact linear-algebra routines (invariant measures, traces, capacities),
asymptotic condition checks over parameterised families of chains, and
Monte Carlo experiments for the distributional statements.
"""

__version__ = "0.1.0"

from .chain import (Chain, ChainSpec, StationaryMeasure, additive_until_hitting, build_chain,
                    escape_probability, expected_additive_until_hitting, hitting_probability,
                    stationary_measure, transient_functional, transient_functional_vector)
from .trace import (TraceChain, extract_trace_path, h_trace, return_distribution,
                    trace_by_elimination, trace_by_hitting, trace_stationary)
from .potential import (CapacityReport, IdentityCheck, capacity, centered_occupation_bound,
                        dirichlet_form, equilibrium_potential, h_capacity_scaling,
                        hitting_integral_formula, mean_set_rate, point_capacity,
                        replacement_bound, three_set_rate_identity, two_set_rate_identity)
from .analysis import (DEFAULT_GRID, ChainFamily, FitResult, MetaPartition, TunnelingReport,
                       ValleySpec, check_valley_conditions, fit_sequence, scale_fit,
                       tunneling_analysis, valley_depth)
from .paths import PathSample, ProjectedPath
from .simulate import (ExitLawStats, MetaRateEstimate, empirical_meta_rates, exit_law_experiment,
                       ks_exponential_test, project_path, replica_rng, sample_path)
from .fixtures import BUILTINS, Fixture, builtin
from .expr import Expression, compile_expression
from .identities import identity_battery
from .verify import verify_example
from .familyio import FamilyDefinition, dump_family, load_family, parse_family

__all__ = [
    "Chain", "ChainSpec", "StationaryMeasure", "additive_until_hitting", "build_chain",
    "escape_probability", "expected_additive_until_hitting", "hitting_probability",
    "stationary_measure", "transient_functional", "transient_functional_vector",
    "TraceChain", "extract_trace_path", "h_trace", "return_distribution",
    "trace_by_elimination", "trace_by_hitting", "trace_stationary", "CapacityReport",
    "IdentityCheck", "capacity", "centered_occupation_bound", "dirichlet_form",
    "equilibrium_potential", "h_capacity_scaling", "hitting_integral_formula",
    "mean_set_rate", "point_capacity", "replacement_bound", "three_set_rate_identity",
    "two_set_rate_identity",
    "DEFAULT_GRID", "ChainFamily", "FitResult", "MetaPartition", "TunnelingReport",
    "ValleySpec", "check_valley_conditions", "fit_sequence", "scale_fit",
    "tunneling_analysis", "valley_depth", "PathSample", "ProjectedPath", "ExitLawStats",
    "MetaRateEstimate", "empirical_meta_rates", "exit_law_experiment",
    "ks_exponential_test", "project_path", "replica_rng", "sample_path", "BUILTINS",
    "Fixture", "builtin", "FamilyDefinition", "dump_family", "load_family", "parse_family",
    "Expression", "compile_expression", "identity_battery", "verify_example",
]
