"""Lattice simplex enumeration, discrete multilinear averages, and density experiments."""

from .core import Simplex, admissible_radii, gram_matrix, is_isometric, orthonormal_simplex
from .enumeration import (
    brute_force_embeddings,
    count_scaling_fit,
    pinned_count,
    simplex_embeddings,
    sphere_points,
)
from .grids import Box, GridFunction, LatticeSet
from .lab import (
    ExperimentConfig,
    ExperimentReport,
    corollary_q_check,
    emit_report,
    generate_set,
    load_report,
    pinned_experiment,
)
from .theta import CoefficientTable, phase_integral, tail_sum, theta_sum

__all__ = [
    "Simplex",
    "admissible_radii",
    "gram_matrix",
    "is_isometric",
    "orthonormal_simplex",
    "sphere_points",
    "simplex_embeddings",
    "brute_force_embeddings",
    "count_scaling_fit",
    "pinned_count",
    "Box",
    "GridFunction",
    "LatticeSet",
    "ExperimentConfig",
    "ExperimentReport",
    "generate_set",
    "pinned_experiment",
    "corollary_q_check",
    "emit_report",
    "load_report",
    "CoefficientTable",
    "tail_sum",
    "theta_sum",
    "phase_integral",
]

__version__ = "0.1.0"
