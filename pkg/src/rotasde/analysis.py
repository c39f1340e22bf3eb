"""Post-processing: strong-error measurement over coupled paths, log-log order
regression, distributional checks of the Brownian model, and timing summaries."""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ._backend import kernels
from .config import DEFAULT_TOLS
from .so_n_core import LogDomainError


@dataclass
class ConvergenceReport:
    deltas: tuple
    errors: tuple
    slope: float
    intercept: float
    n_paths: int
    stderr_slope: float

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float)
        e = np.asarray(self.errors, dtype=float)
        if not np.all(np.diff(d) < 0):
            raise ValueError("deltas must be strictly decreasing")
        if not np.all(e > 0):
            raise ValueError("errors must be positive")
        if not np.isfinite(self.slope):
            raise ValueError("slope must be finite")


@dataclass
class QqData:
    sample_q: np.ndarray
    theory_q: np.ndarray

    def __post_init__(self):
        if len(self.sample_q) != len(self.theory_q):
            raise ValueError("quantile columns must have equal length")
        if np.any(np.diff(self.sample_q) < 0) or np.any(np.diff(self.theory_q) < 0):
            raise ValueError("quantile columns must be sorted ascending")


def pathwise_sup_sq(coarse, reference):
    """Squared sup-over-shared-grid distance between one coupled pair; the
    shared grid is the coarse grid."""
    ratio = coarse.delta / reference.delta
    stride = int(round(ratio))
    if abs(ratio - stride) > 1e-9 or stride < 1:
        raise ValueError(f"reference grid does not refine coarse grid (ratio {ratio})")
    if (coarse.m_steps * stride != reference.m_steps
            or abs(coarse.times[-1] - reference.times[-1]) > 1e-9):
        raise ValueError("paths cover different time intervals")
    diff = coarse.state_array - reference.state_array[::stride]
    sup = np.max(np.sqrt(np.sum(diff * diff, axis=(1, 2))))
    return float(sup) ** 2


def strong_error(coarse, reference):
    """Monte-Carlo strong error sqrt(E[sup_t ||R_coarse - R_ref||_F^2]) over
    coupled path pairs."""
    if len(coarse) != len(reference) or not coarse:
        raise ValueError("need equally many coarse and reference paths")
    acc = 0.0
    for c, r in zip(coarse, reference):
        acc += pathwise_sup_sq(c, r)
    return float(np.sqrt(acc / len(coarse)))


def fit_order(deltas, errors, n_paths=0):
    """Least-squares slope of log(error) against log(delta); the slope is the
    empirical strong order, stderr from the regression residuals."""
    deltas = np.asarray(deltas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(deltas) < 3:
        raise ValueError("need at least 3 step sizes to fit an order")
    x = np.log(deltas)
    y = np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = len(x) - 2
    sigma2 = float(resid @ resid) / dof
    stderr = float(np.sqrt(sigma2 / np.sum((x - x.mean()) ** 2)))
    order = np.argsort(-deltas, kind="stable")
    return ConvergenceReport(tuple(deltas[order]), tuple(errors[order]),
                             float(slope), float(intercept), n_paths, stderr)


def log_increment_samples(path, scale_mode="standardized"):
    """Strictly-upper entries of log(R_{m-1}^T R_m) per step, pooled; the
    standardized mode divides by sqrt(delta/2) so the Brownian model gives
    approximately Normal(0, 1) samples."""
    if scale_mode not in ("standardized", "raw"):
        raise ValueError(f"unknown scale_mode {scale_mode!r}")
    arr = path.state_array
    n = arr.shape[1]
    iu = np.triu_indices(n, 1)
    out = np.empty((path.m_steps, n * (n - 1) // 2))
    for m in range(path.m_steps):
        rel = np.ascontiguousarray(arr[m].T @ arr[m + 1])
        try:
            z = kernels.logm_raw(rel, DEFAULT_TOLS.log_tol)
        except ValueError as e:
            raise LogDomainError(f"step {m + 1}: {e}") from None
        out[m] = z[iu]
    flat = out.ravel()
    if scale_mode == "standardized":
        flat = flat / np.sqrt(path.delta / 2.0)
    return flat


def qq_against_normal(samples):
    """Sorted samples paired with standard-normal quantiles at plotting
    positions (i - 0.5)/N."""
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 10:
        raise ValueError("need at least 10 samples")
    n = len(samples)
    theory = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return QqData(np.sort(samples), theory)


def convergence_to_identity(path):
    """(time, ||state - I||_F) along the trajectory."""
    arr = path.state_array
    n = arr.shape[1]
    eye = np.eye(n)
    return [(float(t), float(np.linalg.norm(m - eye)))
            for t, m in zip(path.times, arr)]


def timing_summary(paths_by_scheme):
    """Per-scheme mean/median step nanoseconds pooled over the given paths."""
    out = {}
    for scheme, paths in paths_by_scheme.items():
        pooled = np.concatenate([p.step_nanos for p in paths]) if paths else np.array([])
        if pooled.size == 0 or not np.any(pooled):
            raise ValueError(f"no timing diagnostics recorded for {scheme!r}")
        out[scheme] = {
            "mean_ns": float(np.mean(pooled)),
            "median_ns": float(np.median(pooled)),
            "steps": int(pooled.size),
        }
    return out
