"""Pure-numpy hot-path kernels (fallback backend).

All functions operate on raw C-contiguous float64 arrays; type wrapping and
error translation happen one level up.  The compiled backend mirrors these
signatures exactly.
"""
import numpy as np

BACKEND = "python"


def _taylor_coef(order):
    # binomial series sqrt(I - Y) = I + sum_k c_k Y^k, c_k = c_{k-1}*(2k-3)/(2k)
    c = np.empty(order)
    acc = -0.5
    c[0] = acc
    for k in range(2, order + 1):
        acc *= (2 * k - 3) / (2 * k)
        c[k - 1] = acc
    return c


def correction_exact(z):
    """sqrt(I - Z^T Z) - I via symmetric eigendecomposition; caller guarantees contraction."""
    n = z.shape[0]
    y = z.T @ z
    mu, v = np.linalg.eigh(y)
    d = np.sqrt(np.clip(1.0 - mu, 0.0, None))
    c = (v * d) @ v.T - np.eye(n)
    return (c + c.T) / 2


def correction_taylor(z, order):
    n = z.shape[0]
    y = z.T @ z
    coef = _taylor_coef(order)
    c = np.zeros((n, n))
    p = np.eye(n)
    for k in range(order):
        p = p @ y
        c += coef[k] * p
    return (c + c.T) / 2


def contraction_ok(z, margin):
    """True iff all singular values of z are <= 1 - margin (Cholesky probe)."""
    n = z.shape[0]
    a = (1.0 - margin) ** 2 * np.eye(n) - z.T @ z
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return True


def defect_of(m):
    """Orthogonality defect ||M^T M - I||_F."""
    n = m.shape[0]
    g = m.T @ m
    g[np.diag_indices(n)] -= 1.0
    return float(np.linalg.norm(g))


def mul_update(r, g):
    """One group update R <- R G plus the defect of the result."""
    out = r @ g
    return out, defect_of(out)


def tasp_core(r, z, margin, method, order):
    """Full tangent-space step: contraction test, correction, update.

    method 0 = exact sqrt, 1 = truncated series of the given order.
    Returns (r_next, defect, ok); ok False means the draw must be rejected.
    The exact path runs one eigendecomposition that serves both the
    contraction test (largest eigenvalue of Z^T Z) and the square root.
    """
    n = z.shape[0]
    if method == 0:
        y = z.T @ z
        mu, v = np.linalg.eigh(y)
        if mu[-1] >= (1.0 - margin) ** 2:
            return None, 0.0, False
        d = np.sqrt(np.clip(1.0 - mu, 0.0, None))
        s = (v * d) @ v.T  # sqrt(I - Z^T Z); G = Z + sqrt cancels the two I terms
        g = (s + s.T) / 2 + z
    else:
        if not contraction_ok(z, margin):
            return None, 0.0, False
        g = np.eye(n) + z + correction_taylor(z, order)
    out, d = mul_update(r, g)
    return out, d, True


def logm_raw(r, log_tol):
    """Principal log of a rotation; raises ValueError on angles within log_tol of pi.

    Works from the symmetric part H = (R+R^T)/2 (eigenvalues cos(theta), one per
    plane, so sin-degenerate angle pairs stay separated) and pairs each plane by
    the action of K = (R-R^T)/2.  Pair vectors are built as p1 = Kv/|Kv|,
    p2 = -Kp1/|Kp1|: the image of K is orthogonal to its kernel, so this kills
    the +-1-eigenspace contamination that raw eigh vectors can carry.
    """
    n = r.shape[0]
    h = (r + r.T) / 2
    k = (r - r.T) / 2
    mu, v = np.linalg.eigh(h)  # ascending: cos near -1 first
    ktol = 64 * n * np.finfo(float).eps
    z = np.zeros((n, n))
    cols = []
    for idx in range(n):
        w = v[:, idx].copy()
        for b in cols:
            w -= (b @ w) * b
        nw = np.linalg.norm(w)
        if nw < 1e-6:
            continue  # plane already consumed by an earlier pair
        w /= nw
        u1 = k @ w
        s1 = np.linalg.norm(u1)
        if s1 <= ktol:
            if mu[idx] < 0.0:
                raise ValueError("rotation has a block angle at pi; log undefined")
            cols.append(w)
            continue
        p1 = u1 / s1
        for b in cols:
            p1 -= (b @ p1) * b
        p1 /= np.linalg.norm(p1)
        u2 = k @ p1
        s = np.linalg.norm(u2)
        p2 = -u2 / s
        for b in cols:
            p2 -= (b @ p2) * b
        p2 -= (p1 @ p2) * p1
        p2 /= np.linalg.norm(p2)
        c = 0.5 * (p1 @ h @ p1 + p2 @ h @ p2)
        th = np.arctan2(s, c)
        if th >= np.pi - log_tol:
            raise ValueError("rotation block angle within log_tol of pi")
        z += th * (np.outer(p1, p2) - np.outer(p2, p1))
        cols.append(p1)
        cols.append(p2)
    return (z - z.T) / 2
