"""Parity tests between the compiled and pure-python kernel backends."""
import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.linalg as sla

from rotasde import backend_name
from rotasde._backend import get_kernels

py = get_kernels("python")
cy = pytest.importorskip("rotasde._backend._cykernels")

MARGIN = 1e-3
LOG_TOL = 1e-8


def rnd_skew(rng, n, spectral):
    a = rng.standard_normal((n, n))
    z = (a - a.T) / 2.0
    return z * (spectral / np.linalg.norm(z, 2))


def rnd_rotation(rng, n, angle):
    return sla.expm(rnd_skew(rng, n, angle))


def test_backend_names():
    assert py.BACKEND == "python"
    assert cy.BACKEND == "cython"
    assert backend_name() in ("python", "cython")


def test_get_kernels_dispatch():
    assert get_kernels(None).BACKEND == backend_name()
    assert get_kernels("python") is py
    assert get_kernels("cython") is cy
    with pytest.raises(ValueError):
        get_kernels("fortran")


def test_env_override_selects_backend():
    for choice in ("python", "cython"):
        env = dict(os.environ, ROTASDE_BACKEND=choice)
        out = subprocess.run(
            [sys.executable, "-c", "import rotasde; print(rotasde.backend_name())"],
            capture_output=True, text=True, env=env, check=True)
        assert out.stdout.strip() == choice


@pytest.mark.parametrize("n", [2, 3, 5, 8, 12, 50])
@pytest.mark.parametrize("spectral", [0.1, 0.5, 0.95])
def test_correction_exact_parity(n, spectral):
    rng = np.random.default_rng(1000 * n + int(100 * spectral))
    z = rnd_skew(rng, n, spectral)
    a = py.correction_exact(z)
    b = cy.correction_exact(z)
    assert np.allclose(a, b, atol=1e-13)


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8])
def test_correction_taylor_parity(order):
    rng = np.random.default_rng(order)
    z = rnd_skew(rng, 6, 0.3)
    a = py.correction_taylor(z, order)
    b = cy.correction_taylor(z, order)
    assert np.allclose(a, b, atol=1e-14)


@pytest.mark.parametrize("spectral", [0.3, 0.99, 0.9985, 1.0005, 1.3])
def test_contraction_ok_parity(spectral):
    rng = np.random.default_rng(int(spectral * 1e4))
    z = rnd_skew(rng, 5, spectral)
    assert py.contraction_ok(z, MARGIN) == cy.contraction_ok(z, MARGIN)


def test_defect_of_parity():
    rng = np.random.default_rng(7)
    for n in (2, 4, 9, 50):
        m = rnd_rotation(rng, n, 0.8) + 1e-8 * rng.standard_normal((n, n))
        assert py.defect_of(m) == pytest.approx(cy.defect_of(m), rel=1e-12)


def test_mul_update_parity():
    rng = np.random.default_rng(8)
    for n in (2, 5, 13, 50):
        r = rnd_rotation(rng, n, 0.9)
        g = np.eye(n) + rnd_skew(rng, n, 0.2)
        oa, da = py.mul_update(r, g)
        ob, db = cy.mul_update(r, g)
        assert np.allclose(oa, ob, atol=1e-14)
        assert da == pytest.approx(db, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 6, 11, 50])
@pytest.mark.parametrize("method,order", [(0, 0), (1, 5), (1, 2)])
def test_tasp_core_accept_parity(n, method, order):
    rng = np.random.default_rng(31 * n + method)
    r = rnd_rotation(rng, n, 0.7)
    z = rnd_skew(rng, n, 0.4)
    oa, da, ka = py.tasp_core(r, z, MARGIN, method, order)
    ob, db, kb = cy.tasp_core(r, z, MARGIN, method, order)
    assert ka and kb
    assert np.allclose(oa, ob, atol=1e-12)
    assert da == pytest.approx(db, rel=1e-6, abs=1e-14)
    lim = 1e-12 if method == 0 else 0.5 * 0.4 ** (2 * (order + 1))
    assert py.defect_of(oa) < lim


@pytest.mark.parametrize("spectral", [1.0005, 1.5, 3.0])
@pytest.mark.parametrize("method", [0, 1])
def test_tasp_core_reject_parity(spectral, method):
    rng = np.random.default_rng(int(spectral * 100) + method)
    r = rnd_rotation(rng, 4, 0.5)
    z = rnd_skew(rng, 4, spectral)
    oa, da, ka = py.tasp_core(r, z, MARGIN, method, 5)
    ob, db, kb = cy.tasp_core(r, z, MARGIN, method, 5)
    assert not ka and not kb
    assert oa is None and ob is None


@pytest.mark.parametrize("n,angle", [(2, 0.7), (3, 1.2), (5, 2.0),
                                     (9, np.pi - 0.3), (50, 1.5)])
def test_logm_raw_parity_generic(n, angle):
    rng = np.random.default_rng(17 * n)
    r = rnd_rotation(rng, n, angle)
    a = py.logm_raw(r, LOG_TOL)
    b = cy.logm_raw(r, LOG_TOL)
    assert np.allclose(a, b, atol=5e-13)
    assert np.allclose(sla.expm(a), r, atol=1e-10)


def test_logm_raw_parity_degenerate_equal_angles():
    th = 1.1
    z = np.zeros((6, 6))
    for k in range(3):
        z[2 * k, 2 * k + 1] = th
        z[2 * k + 1, 2 * k] = -th
    q = sla.qr(np.random.default_rng(23).standard_normal((6, 6)))[0]
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    r = q @ sla.expm(z) @ q.T
    a = py.logm_raw(r, LOG_TOL)
    b = cy.logm_raw(r, LOG_TOL)
    assert np.allclose(a, b, atol=5e-13)
    assert np.allclose(sla.expm(a), r, atol=1e-10)


def test_logm_raw_parity_near_identity_and_identity():
    rng = np.random.default_rng(29)
    for n in (3, 7):
        for angle in (0.0, 1e-9, 1e-4):
            r = np.eye(n) if angle == 0.0 else rnd_rotation(rng, n, angle)
            a = py.logm_raw(r, LOG_TOL)
            b = cy.logm_raw(r, LOG_TOL)
            assert np.allclose(a, b, atol=1e-15)


def test_logm_raw_half_turn_rejected_by_both():
    r = np.diag([-1.0, -1.0, 1.0])
    with pytest.raises(ValueError):
        py.logm_raw(r, LOG_TOL)
    with pytest.raises(ValueError):
        cy.logm_raw(r, LOG_TOL)


def test_logm_raw_random_stress_parity():
    rng = np.random.default_rng(31)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        angle = float(rng.uniform(0.05, np.pi - 0.4))
        r = rnd_rotation(rng, n, angle)
        a = py.logm_raw(r, LOG_TOL)
        b = cy.logm_raw(r, LOG_TOL)
        assert np.allclose(a, b, atol=5e-13)
