# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-path kernels; mirrors _pykernels exactly.

Matrices arrive C-contiguous.  BLAS/LAPACK want column-major, so products are
issued on the transposed views: for row-major X the same buffer read
column-major is X^T, and (AB)^T = B^T A^T turns every row-major product into a
plain 'N','N' dgemm with swapped operands.  Symmetric-eigensolver input needs
no care (symmetric buffers read the same either way); its eigenvector output
read row-major holds one eigenvector per ROW.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, sqrt
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm, dgemv
from scipy.linalg.cython_lapack cimport dpotrf, dsyevd

cnp.import_array()

BACKEND = "cython"

cdef double PI = 3.141592653589793238462643383279502884


cdef inline void _mm(double* a, double* b, double* out, int n) noexcept nogil:
    # row-major out = a @ b
    cdef double one = 1.0, zero = 0.0
    cdef char nt = b'N'
    dgemm(&nt, &nt, &n, &n, &n, &one, b, &n, a, &n, &zero, out, &n)


cdef inline void _gram(double* a, double* out, int n) noexcept nogil:
    # row-major out = a^T @ a  (fortran view: A' A'^T)
    cdef double one = 1.0, zero = 0.0
    cdef char nt = b'N', tt = b'T'
    dgemm(&nt, &tt, &n, &n, &n, &one, a, &n, a, &n, &zero, out, &n)


cdef inline double _defect_from(double* m, double* scratch, int n) noexcept nogil:
    cdef int i, j
    cdef double acc = 0.0, val
    _gram(m, scratch, n)
    for i in range(n):
        scratch[i * n + i] -= 1.0
    for i in range(n * n):
        val = scratch[i]
        acc += val * val
    return sqrt(acc)


cdef int _eigh_inplace(double* a, double* w, int n, double* work, int lwork,
                       int* iwork, int liwork) noexcept nogil:
    # symmetric eigendecomposition; on exit rows of the C-view of a are eigenvectors
    cdef char jobz = b'V', uplo = b'L'
    cdef int info = 0
    dsyevd(&jobz, &uplo, &n, a, &n, w, work, &lwork, iwork, &liwork, &info)
    return info


cdef inline int _lwork(int n) noexcept nogil:
    return 1 + 6 * n + 2 * n * n


cdef inline int _liwork(int n) noexcept nogil:
    return 3 + 5 * n


def correction_exact(cnp.ndarray[double, ndim=2, mode="c"] z):
    cdef int n = z.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] y = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] c = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=1] w = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] work = np.empty(_lwork(n))
    cdef cnp.ndarray[int, ndim=1] iwork = np.empty(_liwork(n), dtype=np.intc)
    cdef int i, j, info
    cdef double d, val
    _gram(&z[0, 0], &y[0, 0], n)
    info = _eigh_inplace(&y[0, 0], &w[0], n, &work[0], _lwork(n), <int*> &iwork[0], _liwork(n))
    if info != 0:
        raise np.linalg.LinAlgError("symmetric eigensolver failed")
    # scale eigenvector rows by sqrt(sqrt(1-mu)) then C = T^T T - I
    for i in range(n):
        d = 1.0 - w[i]
        if d < 0.0:
            d = 0.0
        d = sqrt(sqrt(d))
        for j in range(n):
            y[i, j] *= d
    _gram(&y[0, 0], &c[0, 0], n)
    for i in range(n):
        c[i, i] -= 1.0
    for i in range(n):
        for j in range(i):
            val = 0.5 * (c[i, j] + c[j, i])
            c[i, j] = val
            c[j, i] = val
    return c


def correction_taylor(cnp.ndarray[double, ndim=2, mode="c"] z, int order):
    cdef int n = z.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] y = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] p = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] q = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] c = np.zeros((n, n))
    cdef int i, j, k
    cdef double coef = -0.5, val
    _gram(&z[0, 0], &y[0, 0], n)
    memcpy(&p[0, 0], &y[0, 0], n * n * sizeof(double))
    for k in range(1, order + 1):
        if k > 1:
            coef *= (2.0 * k - 3.0) / (2.0 * k)
            _mm(&p[0, 0], &y[0, 0], &q[0, 0], n)
            p, q = q, p
        for i in range(n * n):
            (&c[0, 0])[i] += coef * (&p[0, 0])[i]
    for i in range(n):
        for j in range(i):
            val = 0.5 * (c[i, j] + c[j, i])
            c[i, j] = val
            c[j, i] = val
    return c


def contraction_ok(cnp.ndarray[double, ndim=2, mode="c"] z, double margin):
    cdef int n = z.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] a = np.empty((n, n))
    cdef double one = -1.0, beta = 1.0, lim = (1.0 - margin) * (1.0 - margin)
    cdef char nt = b'N', tt = b'T', uplo = b'L'
    cdef int i, info = 0
    memset(&a[0, 0], 0, n * n * sizeof(double))
    for i in range(n):
        a[i, i] = lim
    dgemm(&nt, &tt, &n, &n, &n, &one, &z[0, 0], &n, &z[0, 0], &n, &beta, &a[0, 0], &n)
    dpotrf(&uplo, &n, &a[0, 0], &n, &info)
    return info == 0


def defect_of(cnp.ndarray[double, ndim=2, mode="c"] m):
    cdef int n = m.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] scratch = np.empty((n, n))
    return _defect_from(&m[0, 0], &scratch[0, 0], n)


def mul_update(cnp.ndarray[double, ndim=2, mode="c"] r,
               cnp.ndarray[double, ndim=2, mode="c"] g):
    cdef int n = r.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] out = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] scratch = np.empty((n, n))
    _mm(&r[0, 0], &g[0, 0], &out[0, 0], n)
    return out, _defect_from(&out[0, 0], &scratch[0, 0], n)


def tasp_core(cnp.ndarray[double, ndim=2, mode="c"] r,
              cnp.ndarray[double, ndim=2, mode="c"] z,
              double margin, int method, int order):
    # exact path: one eigendecomposition serves both the contraction test
    # (largest eigenvalue of Z^T Z) and the square root
    cdef int n = r.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] g
    cdef cnp.ndarray[double, ndim=2, mode="c"] y
    cdef cnp.ndarray[double, ndim=1] w, work
    cdef cnp.ndarray[int, ndim=1] iwork
    cdef int i, j, info
    cdef double d, val, lim = (1.0 - margin) * (1.0 - margin)
    if method == 0:
        y = np.empty((n, n))
        g = np.empty((n, n))
        w = np.empty(n)
        work = np.empty(_lwork(n))
        iwork = np.empty(_liwork(n), dtype=np.intc)
        _gram(&z[0, 0], &y[0, 0], n)
        info = _eigh_inplace(&y[0, 0], &w[0], n, &work[0], _lwork(n), <int*> &iwork[0], _liwork(n))
        if info != 0:
            raise np.linalg.LinAlgError("symmetric eigensolver failed")
        if w[n - 1] >= lim:
            return None, 0.0, False
        for i in range(n):
            d = 1.0 - w[i]
            if d < 0.0:
                d = 0.0
            d = sqrt(sqrt(d))
            for j in range(n):
                y[i, j] *= d
        _gram(&y[0, 0], &g[0, 0], n)  # sqrt(I - Z^T Z); G = Z + sqrt
        for i in range(n):
            for j in range(i):
                val = 0.5 * (g[i, j] + g[j, i])
                g[i, j] = val
                g[j, i] = val
    else:
        if not contraction_ok(z, margin):
            return None, 0.0, False
        g = correction_taylor(z, order)
        for i in range(n):
            g[i, i] += 1.0
    for i in range(n * n):
        (&g[0, 0])[i] += (&z[0, 0])[i]
    out, dd = mul_update(r, g)
    return out, dd, True


def logm_raw(cnp.ndarray[double, ndim=2, mode="c"] r, double log_tol):
    cdef int n = r.shape[0]
    cdef cnp.ndarray[double, ndim=2, mode="c"] h = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] hh = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] kk = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] z = np.zeros((n, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] cols = np.empty((n, n))  # built basis, row per vector
    cdef cnp.ndarray[double, ndim=2, mode="c"] s1rows = np.empty((n // 2 + 1, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] s2rows = np.empty((n // 2 + 1, n))
    cdef cnp.ndarray[double, ndim=2, mode="c"] acc = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=1] w = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] vv = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] p1 = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] p2 = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] tmp = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] dots = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] work = np.empty(_lwork(n))
    cdef cnp.ndarray[int, ndim=1] iwork = np.empty(_liwork(n), dtype=np.intc)
    cdef int i, j, idx, ncols = 0, nplanes = 0, info
    cdef double ktol = 64 * n * 2.220446049250313e-16
    cdef double s1, s, cth, th, nv, dot
    for i in range(n):
        for j in range(n):
            h[i, j] = 0.5 * (r[i, j] + r[j, i])
            kk[i, j] = 0.5 * (r[i, j] - r[j, i])
    memcpy(&hh[0, 0], &h[0, 0], n * n * sizeof(double))
    info = _eigh_inplace(&h[0, 0], &w[0], n, &work[0], _lwork(n), <int*> &iwork[0], _liwork(n))
    if info != 0:
        raise np.linalg.LinAlgError("symmetric eigensolver failed")
    # h rows are now eigenvectors of (R+R^T)/2, eigenvalues ascending (cos near -1 first)
    for idx in range(n):
        for i in range(n):
            vv[i] = h[idx, i]
        _project_out(&vv[0], &cols[0, 0], ncols, n, &dots[0])
        nv = _norm(&vv[0], n)
        if nv < 1e-6:
            continue
        for i in range(n):
            vv[i] /= nv
        _mv(&kk[0, 0], &vv[0], &p1[0], n)
        s1 = _norm(&p1[0], n)
        if s1 <= ktol:
            if w[idx] < 0.0:
                raise ValueError("rotation has a block angle at pi; log undefined")
            for i in range(n):
                cols[ncols, i] = vv[i]
            ncols += 1
            continue
        for i in range(n):
            p1[i] /= s1
        _project_out(&p1[0], &cols[0, 0], ncols, n, &dots[0])
        nv = _norm(&p1[0], n)
        for i in range(n):
            p1[i] /= nv
        _mv(&kk[0, 0], &p1[0], &p2[0], n)
        s = _norm(&p2[0], n)
        for i in range(n):
            p2[i] = -p2[i] / s
        _project_out(&p2[0], &cols[0, 0], ncols, n, &dots[0])
        dot = 0.0
        for i in range(n):
            dot += p1[i] * p2[i]
        for i in range(n):
            p2[i] -= dot * p1[i]
        nv = _norm(&p2[0], n)
        for i in range(n):
            p2[i] /= nv
        # cos from the symmetric part restricted to the plane (saved copy: the
        # eigh overwrote h with eigenvectors)
        cth = 0.0
        _mv(&hh[0, 0], &p1[0], &tmp[0], n)
        for i in range(n):
            cth += p1[i] * tmp[i]
        _mv(&hh[0, 0], &p2[0], &tmp[0], n)
        for i in range(n):
            cth += p2[i] * tmp[i]
        cth *= 0.5
        th = atan2(s, cth)
        if th >= PI - log_tol:
            raise ValueError("rotation block angle within log_tol of pi")
        for i in range(n):
            s1rows[nplanes, i] = th * p1[i]
            s2rows[nplanes, i] = p2[i]
        nplanes += 1
        for i in range(n):
            cols[ncols, i] = p1[i]
        ncols += 1
        for i in range(n):
            cols[ncols, i] = p2[i]
        ncols += 1
    # Z = sum_k th_k (p1 p2^T - p2 p1^T) batched as S1^T S2 minus its transpose
    cdef double one = 1.0, zero = 0.0
    cdef char nt = b'N', tt = b'T'
    cdef double val
    if nplanes > 0:
        dgemm(&nt, &tt, &n, &n, &nplanes, &one, &s2rows[0, 0], &n,
              &s1rows[0, 0], &n, &zero, &acc[0, 0], &n)
        for i in range(n):
            for j in range(i):
                val = acc[i, j] - acc[j, i]
                z[i, j] = val
                z[j, i] = -val
    return z


cdef inline double _norm(double* v, int n) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(n):
        acc += v[i] * v[i]
    return sqrt(acc)


cdef inline void _mv(double* m, double* v, double* out, int n) noexcept nogil:
    # out = M @ v for row-major M (fortran view is M^T, so trans='T')
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1
    cdef char tt = b'T'
    dgemv(&tt, &n, &n, &one, m, &n, v, &inc, &zero, out, &inc)


cdef inline void _project_out(double* v, double* cols, int ncols, int n,
                              double* dots) noexcept nogil:
    # v -= sum_c (cols_c . v) cols_c over the first ncols rows of cols
    cdef double one = 1.0, neg = -1.0, zero = 0.0
    cdef int inc = 1
    cdef char nt = b'N', tt = b'T'
    if ncols == 0:
        return
    dgemv(&tt, &n, &ncols, &one, cols, &n, v, &inc, &zero, dots, &inc)
    dgemv(&nt, &n, &ncols, &neg, cols, &n, dots, &inc, &one, v, &inc)
