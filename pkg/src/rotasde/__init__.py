"""Geometry-preserving simulation of multiplicative SDEs on SO(n)."""

__version__ = "0.1.0"

from ._backend import backend_name
from .analysis import (ConvergenceReport, QqData, convergence_to_identity,
                       fit_order, log_increment_samples, qq_against_normal,
                       strong_error, timing_summary)
from .config import DEFAULT_TOLS, Tolerances
from .integrators import (NoiseTable, PathRecord, RetriesExhaustedError,
                          StepConfig, coarsen, euclidean_em_step,
                          generate_noise, simulate_path, slem_step, tasp_step,
                          tangent_increment)
from .rng import make_stream, random_rotation
from .sde_model import (ItoDrift, SdeModel, brownian_model, descent_model,
                        effective_ito_drift, k_term_fd, strat_to_ito,
                        sum_diffusion_squares)
from .so_n_core import (DimensionError, LogDomainError, NotContractionError,
                        Rotation, SkewMatrix, SkewSchur, SymMatrix, correction,
                        expm_skew, geodesic_distance, is_contraction,
                        logm_rotation, orthogonality_defect, pack_skew,
                        project_tangent, skew_basis, skew_schur)

__all__ = [
    "__version__", "backend_name",
    "Tolerances", "DEFAULT_TOLS",
    "SkewMatrix", "Rotation", "SymMatrix", "SkewSchur",
    "DimensionError", "NotContractionError", "LogDomainError",
    "skew_basis", "project_tangent", "skew_schur", "correction",
    "is_contraction", "expm_skew", "logm_rotation", "geodesic_distance",
    "orthogonality_defect", "pack_skew",
    "SdeModel", "ItoDrift", "sum_diffusion_squares", "k_term_fd",
    "strat_to_ito", "effective_ito_drift", "brownian_model", "descent_model",
    "NoiseTable", "StepConfig", "PathRecord", "RetriesExhaustedError",
    "tangent_increment", "tasp_step", "slem_step", "euclidean_em_step",
    "generate_noise", "coarsen", "simulate_path",
    "ConvergenceReport", "QqData", "strong_error", "fit_order",
    "log_increment_samples", "qq_against_normal", "convergence_to_identity",
    "timing_summary",
    "make_stream", "random_rotation",
]
