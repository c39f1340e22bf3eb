"""Dense linear algebra on SO(n) and so(n): basis, projection, block-Schur
decomposition of skew matrices, and the matrix functions (sqrt, exp, log) the
step schemes need."""
import numpy as np
import scipy.linalg

from ._backend import kernels
from .config import DEFAULT_TOLS


class DimensionError(ValueError):
    pass


class NotContractionError(ValueError):
    pass


class LogDomainError(ValueError):
    """A rotation block angle sits at (or within log_tol of) pi."""


def _as_matrix(x):
    """Accept a wrapped type or a raw array; return the raw ndarray."""
    return getattr(x, "entries", x)


def _square(a, name):
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


class SkewMatrix:
    """Element of so(n); the constructor antisymmetrizes so entries + entries^T = 0 exactly."""

    def __init__(self, entries):
        a = _square(entries, "SkewMatrix")
        if a.shape[0] < 2:
            raise DimensionError("SkewMatrix needs n >= 2")
        a = (a - a.T) / 2
        a.setflags(write=False)
        self.entries = a

    @property
    def n(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"SkewMatrix(n={self.n})"


class SymMatrix:
    """Symmetric n x n matrix; stored exactly symmetric."""

    def __init__(self, entries):
        a = _square(entries, "SymMatrix")
        a = (a + a.T) / 2
        a.setflags(write=False)
        self.entries = a

    @property
    def n(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"SymMatrix(n={self.n})"


class Rotation:
    """Element of SO(n): orthogonal within orth_tol and det > 0 at construction."""

    def __init__(self, entries, orth_tol=None):
        a = _square(entries, "Rotation")
        tol = DEFAULT_TOLS.orth_tol if orth_tol is None else orth_tol
        d = kernels.defect_of(a)
        if not d <= tol:
            raise ValueError(f"not orthogonal: defect {d:.3e} > {tol:.1e}")
        if not np.linalg.det(a) > 0:
            raise ValueError("orientation-reversing matrix (det <= 0)")
        a.setflags(write=False)
        self.entries = a

    @property
    def n(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"Rotation(n={self.n})"


class SkewSchur:
    """Block-Schur form of a skew matrix: Z = P E_n(angles) P^T.

    p: orthogonal matrix, pair columns first.
    angles: floor(n/2) reals, descending by magnitude, zero-padded.
    block_layout: tuples ("pair", i, j) / ("fixed", i) naming the columns of p
        each 2x2 rotation block (or 1x1 zero block) lives in.
    """

    def __init__(self, p, angles, block_layout):
        p = _square(p, "SkewSchur.p")
        n = p.shape[0]
        if kernels.defect_of(p) > 1e-10:
            raise ValueError("p is not orthogonal within 1e-10")
        angles = np.asarray(angles, dtype=float)
        if angles.shape != (n // 2,):
            raise DimensionError(f"expected {n // 2} angles, got {angles.shape}")
        p.setflags(write=False)
        angles.setflags(write=False)
        self.p = p
        self.angles = angles
        self.block_layout = tuple(block_layout)

    @property
    def n(self):
        return self.p.shape[0]


def pack_skew(w, n):
    """Skew matrix whose strictly-upper entries, in lexicographic (row, col)
    order, are the vector w."""
    w = np.asarray(w, dtype=float)
    if w.shape != (n * (n - 1) // 2,):
        raise DimensionError(f"expected {n * (n - 1) // 2} entries, got {w.shape}")
    z = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    z[iu] = w
    z -= z.T
    return z


def skew_basis(n):
    """Canonical basis E_j = e_ab - e_ba of so(n), pairs (a, b) with a < b in
    lexicographic order; d = n(n-1)/2 elements of Frobenius norm sqrt(2)."""
    if n < 2:
        raise DimensionError("skew_basis needs n >= 2")
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            e = np.zeros((n, n))
            e[a, b] = 1.0
            e[b, a] = -1.0
            out.append(SkewMatrix(e))
    return out


def project_tangent(r, a):
    """Orthogonal projection of an ambient matrix onto the tangent space at r:
    (1/2)(A - R A^T R); the result is R S with S skew."""
    rm = _as_matrix(r)
    a = np.asarray(a, dtype=float)
    if a.shape != rm.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {rm.shape}")
    return (a - rm @ a.T @ rm) / 2


def _gs(v, cols):
    for b in cols:
        v = v - (b @ v) * b
    return v


def skew_schur(z):
    """Real block-Schur form of a skew matrix from the symmetric
    eigendecomposition of Z^T Z.

    Pairs are built by the action of Z itself (p1 = Zv/|Zv|, p2 = -Zp1/|Zp1|),
    which keeps them exactly inside one invariant plane even when eigh mixes
    degenerate eigenspaces or smears the kernel; angles below ~64 n eps of the
    largest are flattened to zero.
    """
    zm = _as_matrix(z)
    zm = _square(zm, "skew_schur input")
    n = zm.shape[0]
    mu, v = np.linalg.eigh(zm.T @ zm)
    order = np.argsort(-mu, kind="stable")
    lam = np.sqrt(np.clip(mu[order], 0.0, None))
    v = v[:, order]
    ktol = 64 * n * np.finfo(float).eps * max(lam[0], np.finfo(float).tiny)
    cols = []
    pair_angles = []
    fixed = []
    for idx in range(n):
        w = _gs(v[:, idx], cols)
        nw = np.linalg.norm(w)
        if nw < 1e-6:
            continue  # plane already consumed
        w = w / nw
        u1 = zm @ w
        s1 = np.linalg.norm(u1)
        if s1 <= ktol:
            fixed.append(w)
            continue
        p1 = _gs(u1 / s1, cols)
        p1 = p1 / np.linalg.norm(p1)
        u2 = zm @ p1
        s = np.linalg.norm(u2)
        p2 = _gs(-u2 / s, cols + [p1])
        p2 = p2 / np.linalg.norm(p2)
        cols.extend([p1, p2])
        pair_angles.append(s)
    for w in fixed:
        w = _gs(w, cols)
        nw = np.linalg.norm(w)
        if nw >= 1e-6:
            cols.append(w / nw)
    if len(cols) != n:
        raise AssertionError(f"basis completion failed: {len(cols)} of {n}")
    # descending by angle, ties kept in first-occurrence order
    order2 = sorted(range(len(pair_angles)), key=lambda i: -pair_angles[i])
    p = np.empty((n, n))
    layout = []
    angles = np.zeros(n // 2)
    k = 0
    for rank, i in enumerate(order2):
        p[:, k] = cols[2 * i]
        p[:, k + 1] = cols[2 * i + 1]
        angles[rank] = pair_angles[i]
        layout.append(("pair", k, k + 1))
        k += 2
    for j in range(2 * len(pair_angles), n):
        p[:, k] = cols[j]
        layout.append(("fixed", k))
        k += 1
    return SkewSchur(p, angles, layout)


def block_matrix(angles, n, diag=None):
    """Assemble E_n(angles) (or D_n when diag values are given) in the layout
    used by skew_schur: 2x2 blocks first, then fixed columns."""
    m = np.zeros((n, n)) if diag is None else np.diag(np.ones(n))
    for i, a in enumerate(angles):
        if diag is None:
            m[2 * i, 2 * i + 1] = a
            m[2 * i + 1, 2 * i] = -a
        else:
            m[2 * i, 2 * i] = diag[i]
            m[2 * i + 1, 2 * i + 1] = diag[i]
    return m


def parse_sqrt_method(method):
    """'exact' -> ('exact', 0); 'taylor(5)' -> ('taylor', 5)."""
    m = method.strip().lower()
    if m == "exact":
        return "exact", 0
    if m.startswith("taylor"):
        inner = m[len("taylor"):].strip()
        if inner == "":
            return "taylor", 5
        if inner.startswith("(") and inner.endswith(")"):
            try:
                order = int(inner[1:-1])
            except ValueError:
                raise ValueError(f"bad taylor order in {method!r}") from None
            if order < 1:
                raise ValueError("taylor order must be >= 1")
            return "taylor", order
    raise ValueError(f"unknown sqrt method {method!r}")


def correction(z, method="exact", pd_margin=None):
    """Normal correction C = sqrt(I - Z^T Z) - I.

    exact: assembled as P D_n(sqrt(1-lambda_i^2)) P^T - I from skew_schur, the
    unique positive-definite square root; taylor(k): degree-k truncated
    binomial series in powers of Z^T Z.  Requires I - Z^T Z positive definite
    (checked via is_contraction with pd_margin).
    """
    zm = _as_matrix(z)
    margin = DEFAULT_TOLS.pd_margin if pd_margin is None else pd_margin
    if not is_contraction(z, margin):
        raise NotContractionError(
            "I - Z^T Z not positive definite within margin; step too large")
    kind, order = parse_sqrt_method(method)
    n = zm.shape[0]
    if kind == "taylor":
        return SymMatrix(kernels.correction_taylor(np.ascontiguousarray(zm), order))
    ss = skew_schur(z)
    d = np.sqrt(np.clip(1.0 - ss.angles**2, 0.0, None))
    c = (ss.p * _column_diag(ss, d)) @ ss.p.T - np.eye(n)
    c = SymMatrix(c)
    g = np.eye(n) + zm + c.entries
    if kernels.defect_of(g) > DEFAULT_TOLS.orth_tol:
        raise ArithmeticError("I + Z + C failed the rotation check after exact sqrt")
    return c


def _column_diag(ss, pair_values):
    """Per-column diagonal of D_n in ss's layout: pair columns carry the pair
    value, fixed columns carry 1."""
    d = np.ones(ss.n)
    for rank, blk in enumerate(b for b in ss.block_layout if b[0] == "pair"):
        d[blk[1]] = d[blk[2]] = pair_values[rank]
    return d


def is_contraction(z, margin=0.0):
    """True iff every singular value of z is <= 1 - margin, decided by a
    Cholesky attempt on (1-margin)^2 I - Z^T Z."""
    if not 0.0 <= margin < 1.0:
        raise ValueError("margin must be in [0, 1)")
    zm = np.ascontiguousarray(_as_matrix(z), dtype=float)
    return bool(kernels.contraction_ok(zm, margin))


def expm_skew(z):
    """Group exponential of a skew matrix (Pade scaling-and-squaring)."""
    zm = _as_matrix(z)
    return Rotation(scipy.linalg.expm(zm))


def logm_rotation(r, log_tol=None):
    """Principal logarithm of a rotation; block angles in (-pi, pi), hard error
    within log_tol of pi."""
    rm = np.ascontiguousarray(_as_matrix(r), dtype=float)
    tol = DEFAULT_TOLS.log_tol if log_tol is None else log_tol
    try:
        z = kernels.logm_raw(rm, tol)
    except ValueError as e:
        raise LogDomainError(str(e)) from None
    return SkewMatrix(z)


def geodesic_distance(r1, r2):
    """Riemannian distance ||log(R1^T R2)||_F."""
    a = _as_matrix(r1)
    b = _as_matrix(r2)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    rel = np.ascontiguousarray(a.T @ b)
    try:
        z = kernels.logm_raw(rel, DEFAULT_TOLS.log_tol)
    except ValueError as e:
        raise LogDomainError(str(e)) from None
    return float(np.linalg.norm(z))


def orthogonality_defect(m):
    """||M^T M - I||_F for any square matrix."""
    mm = _square(_as_matrix(m), "orthogonality_defect input")
    return float(kernels.defect_of(mm))
