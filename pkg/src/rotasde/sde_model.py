"""SDE coefficient bundles on SO(n): Stratonovich-to-Ito conversion with the
K_j directional-derivative terms, and the two built-in benchmark models.

Coefficient callables take raw ndarrays (finite differencing steps slightly
off the manifold, so near-orthogonal inputs must be legal) and a time; both
built-in models are autonomous but the time argument is threaded everywhere.
"""
import numpy as np

from ._backend import kernels
from .config import DEFAULT_TOLS
from .so_n_core import (DimensionError, SkewMatrix, SymMatrix, _as_matrix,
                        pack_skew, skew_basis)


class SdeModel:
    """Coefficient bundle for dR = R B_{o,S} dt + sum_j R B_j o dW_j.

    drift_strat(m, t) and diffusion(m, t, j) return raw skew ndarrays.
    k_terms, when given, is the analytic sum_j K_j.  ito_drift_override, when
    given, is a closed-form B_{o,I} (as printed in a source, possibly
    disagreeing with the converted drift - keep both and compare).

    noise_combo / squares_sum / skew_drift are optional fast paths evaluating
    sum_j B_j dw_j, sum_j B_j^2 and the skew part of B_{o,I} without a
    length-d python loop; the generic loops below remain the reference they
    are tested against.
    """

    def __init__(self, n, d, drift_strat, diffusion, k_terms=None,
                 ito_drift_override=None, name="", noise_combo=None,
                 squares_sum=None, skew_drift=None):
        if n < 2:
            raise DimensionError("SdeModel needs n >= 2")
        self.n = n
        self.d = d
        self.drift_strat = drift_strat
        self.diffusion = diffusion
        self.k_terms = k_terms
        self.ito_drift_override = ito_drift_override
        self.name = name
        self.noise_combo = noise_combo
        self.squares_sum = squares_sum
        self.skew_drift = skew_drift


class ItoDrift:
    """B_{o,I} split into tangent (skew) and normal (symmetric) content."""

    def __init__(self, value):
        value = np.asarray(value, dtype=float)
        self.value = value
        self.skew_part = SkewMatrix((value - value.T) / 2)
        self.sym_part = SymMatrix((value + value.T) / 2)

    @property
    def n(self):
        return self.value.shape[0]


def sum_diffusion_squares(model, r, t):
    """sum_j B_j(r, t)^2; symmetric negative semidefinite."""
    m = _as_matrix(r)
    if model.squares_sum is not None:
        return SymMatrix(model.squares_sum(m, t))
    acc = np.zeros((model.n, model.n))
    for j in range(model.d):
        b = model.diffusion(m, t, j)
        acc += b @ b
    return SymMatrix(acc)


def k_term_fd(model, r, t, j, h=None):
    """Central finite-difference estimate of K_j: the derivative of B_j at r
    in the ambient direction R B_j."""
    if h is None:
        h = DEFAULT_TOLS.fd_step
    if h <= 0:
        raise ValueError("fd step must be positive")
    m = _as_matrix(r)
    b = model.diffusion(m, t, j)
    dm = h * (m @ b)
    bp = model.diffusion(m + dm, t, j)
    bm = model.diffusion(m - dm, t, j)
    return SkewMatrix((bp - bm) / (2 * h))


def strat_to_ito(model, r, t, h=None, force_fd=False):
    """Assemble B_{o,I} = B_{o,S} + (1/2) sum_j K_j + (1/2) sum_j B_j^2.

    Uses the model's analytic k_terms when present (unless force_fd), else the
    finite-difference sum.
    """
    m = _as_matrix(r)
    if model.k_terms is not None and not force_fd:
        ksum = np.asarray(model.k_terms(m, t), dtype=float)
    else:
        ksum = np.zeros((model.n, model.n))
        for j in range(model.d):
            ksum += k_term_fd(model, r, t, j, h).entries
    value = (model.drift_strat(m, t) + ksum / 2
             + sum_diffusion_squares(model, r, t).entries / 2)
    return ItoDrift(value)


def effective_ito_drift(model, r, t):
    """The drift the integrators use: the closed form when the model carries
    one, otherwise the converted drift."""
    if model.ito_drift_override is not None:
        return ItoDrift(model.ito_drift_override(_as_matrix(r), t))
    return strat_to_ito(model, r, t)


def _polar_rotation(m):
    """Closest rotation to a near-orthogonal matrix (polar factor via SVD)."""
    u, _, vt = np.linalg.svd(m)
    q = u @ vt
    if np.linalg.det(q) < 0:
        # flip the smallest singular direction; inputs here are near SO(n)
        u[:, -1] = -u[:, -1]
        q = u @ vt
    return np.ascontiguousarray(q)


def brownian_model(n):
    """Brownian motion on SO(n): B_j = E_j/sqrt(2), Ito drift -(n-1)/4 I."""
    basis = [e.entries / np.sqrt(2.0) for e in skew_basis(n)]
    d = len(basis)
    zero = np.zeros((n, n))
    half_i = -(n - 1) / 4.0 * np.eye(n)
    sq = -(n - 1) / 2.0 * np.eye(n)

    return SdeModel(
        n, d,
        drift_strat=lambda m, t: zero,
        diffusion=lambda m, t, j: basis[j],
        k_terms=lambda m, t: zero,
        ito_drift_override=lambda m, t: half_i,
        name="brownian",
        noise_combo=lambda m, t, dw: pack_skew(dw, n) / np.sqrt(2.0),
        squares_sum=lambda m, t: sq,
        skew_drift=lambda m, t: zero,
    )


def tau_descent(m, n):
    """tau(R) = 1/2 - tr(R)/(2n); linear in the entries, fine off-manifold."""
    return 0.5 - np.trace(m) / (2 * n)


def descent_model(n, drift_source="converted"):
    """Noisy Riemannian descent toward I: B_{o,S} = -log R, B_j = tau(R) E_j.

    drift_source picks the Ito drift: "converted" assembles it from Eq-style
    conversion with the analytic K-sum tau/(2n)(R - R^T); "printed" keeps the
    closed form with coefficient tau/(2n) inside B_{o,I} for replication (the
    two differ by a factor 2 in that small skew term).
    """
    if drift_source not in ("converted", "printed"):
        raise ValueError(f"drift_source must be converted|printed, got {drift_source!r}")
    basis = [e.entries for e in skew_basis(n)]
    d = len(basis)
    log_tol = DEFAULT_TOLS.log_tol

    def neg_log(m):
        return -kernels.logm_raw(_polar_rotation(m), log_tol)

    def k_sum(m, t):
        return tau_descent(m, n) / (2 * n) * (m - m.T)

    def squares(m, t):
        return tau_descent(m, n) ** 2 * (-(n - 1)) * np.eye(n)

    coef = 1.0 / (2 * n) if drift_source == "printed" else 1.0 / (4 * n)

    def fast_skew_drift(m, t):
        # hot path: m is a numerical rotation already, skip the polar factor
        return -kernels.logm_raw(np.ascontiguousarray(m), log_tol) \
            + coef * tau_descent(m, n) * (m - m.T)

    printed_override = None
    if drift_source == "printed":
        def printed_override(m, t):
            tau = tau_descent(m, n)
            return (neg_log(m) + tau / (2 * n) * (m - m.T)
                    - tau ** 2 * (n - 1) / 2.0 * np.eye(n))

    return SdeModel(
        n, d,
        drift_strat=lambda m, t: neg_log(m),
        diffusion=lambda m, t, j: tau_descent(m, n) * basis[j],
        k_terms=k_sum,
        ito_drift_override=printed_override,
        name="descent",
        noise_combo=lambda m, t, dw: tau_descent(m, n) * pack_skew(dw, n),
        squares_sum=squares,
        skew_drift=fast_skew_drift,
    )
