"""Centralized numerical tolerances and defaults."""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """All knobs that decide pass/fail questions in the core routines.

    orth_tol: Rotation construction bound on ||R^T R - I||_F.
    pd_margin: contraction safety margin used by the step maps.
    log_tol: rotation angles within log_tol of pi are a hard log error.
    conversion_tol: agreement bound between finite-difference and analytic
        drift-conversion terms.
    fd_step: central finite-difference step for directional derivatives.
    """

    orth_tol: float = 1e-9
    pd_margin: float = 1e-8
    log_tol: float = 1e-6
    conversion_tol: float = 1e-5
    fd_step: float = 1e-5


DEFAULT_TOLS = Tolerances()
