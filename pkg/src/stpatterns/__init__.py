"""Exact search for integrated spatiotemporal patterns in small dynamical Bayesian networks."""

from .errors import CapacityError, ChecksumError, ContractViolation, EnsembleFormatError
from .life import BitState, GridSymmetry, apply_symmetry, canonical_form, full_group, step, translation_group
from .pattern import SpatioTemporalPattern, TrajectoryWindow
from .ensemble import EnsembleTable, NodeMarginals, build_ensemble, load_ensemble, node_marginals, pattern_probability, save_ensemble
from .integration import Evidence, IntegrationDecision, Partition, enumerate_partitions, evidence, evifpp, is_integrated
from .search import SubsetPatternSpec, evaluate_fixed_nodes, rank_global_patterns, search_subsets

__all__ = [
    "BitState",
    "CapacityError",
    "ChecksumError",
    "ContractViolation",
    "EnsembleFormatError",
    "EnsembleTable",
    "Evidence",
    "GridSymmetry",
    "IntegrationDecision",
    "NodeMarginals",
    "Partition",
    "SpatioTemporalPattern",
    "SubsetPatternSpec",
    "TrajectoryWindow",
    "apply_symmetry",
    "build_ensemble",
    "canonical_form",
    "enumerate_partitions",
    "evaluate_fixed_nodes",
    "evidence",
    "evifpp",
    "full_group",
    "is_integrated",
    "load_ensemble",
    "node_marginals",
    "pattern_probability",
    "rank_global_patterns",
    "save_ensemble",
    "search_subsets",
    "step",
    "translation_group",
]
