"""Tests for analysis: strong error, order fits, QQ data, timing summaries."""
import numpy as np
import pytest
from scipy.special import ndtri

from rotasde import (
    ConvergenceReport,
    LogDomainError,
    PathRecord,
    QqData,
    Rotation,
    StepConfig,
    brownian_model,
    convergence_to_identity,
    fit_order,
    generate_noise,
    log_increment_samples,
    qq_against_normal,
    simulate_path,
    strong_error,
    timing_summary,
)
from rotasde.analysis import pathwise_sup_sq


def fake_path(states, delta, scheme="tasp", nanos=None):
    states = np.asarray(states, dtype=float)
    m = len(states) - 1
    return PathRecord(times=np.arange(m + 1) * delta, state_array=states,
                     defects=np.zeros(m), retries=np.zeros(m, dtype=int),
                     step_nanos=np.asarray(nanos if nanos is not None else np.zeros(m)),
                     scheme=scheme, delta=delta)


def rot2(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------- pathwise sup

def test_pathwise_sup_sq_identical_paths():
    fine = fake_path([np.eye(2)] * 5, 0.25)
    coarse = fake_path([np.eye(2)] * 3, 0.5)
    assert pathwise_sup_sq(coarse, fine) == 0.0


def test_pathwise_sup_sq_known_offset():
    base = [rot2(0.1 * k) for k in range(5)]
    fine = fake_path(base, 0.25)
    shifted = [base[0], base[2], base[4] + 0.3]
    coarse = fake_path(shifted, 0.5)
    # only the endpoint differs, by 0.3 in each of 4 entries
    assert pathwise_sup_sq(coarse, fine) == pytest.approx(4 * 0.09, rel=1e-12)


def test_pathwise_sup_sq_grid_mismatch():
    fine = fake_path([np.eye(2)] * 4, 0.3)
    coarse = fake_path([np.eye(2)] * 3, 0.5)
    with pytest.raises(ValueError):
        pathwise_sup_sq(coarse, fine)


def test_pathwise_sup_sq_interval_mismatch():
    fine = fake_path([np.eye(2)] * 9, 0.25)
    coarse = fake_path([np.eye(2)] * 3, 0.5)
    with pytest.raises(ValueError):
        pathwise_sup_sq(coarse, fine)


# ---------------------------------------------------------------- strong error

def test_strong_error_rms_of_sups():
    offs = []
    for c in (0.1, 0.2):
        arr = [np.eye(2), np.eye(2), np.eye(2) + np.diag([c, 0.0])]
        offs.append(fake_path(arr, 1.0))
    refs = [fake_path([np.eye(2)] * 5, 0.5) for _ in offs]
    got = strong_error(offs, refs)
    assert got == pytest.approx(np.sqrt((0.01 + 0.04) / 2), rel=1e-12)


def test_strong_error_input_checks():
    p = fake_path([np.eye(2)] * 3, 0.5)
    with pytest.raises(ValueError):
        strong_error([p], [p, p])
    with pytest.raises(ValueError):
        strong_error([], [])


# ---------------------------------------------------------------- order fit

def test_fit_order_recovers_exact_slope():
    deltas = np.array([2.0 ** -k for k in range(3, 8)])
    errors = 1.7 * deltas ** 0.5
    rep = fit_order(deltas, errors, n_paths=64)
    assert rep.slope == pytest.approx(0.5, abs=1e-12)
    assert rep.intercept == pytest.approx(np.log(1.7), abs=1e-12)
    assert rep.stderr_slope == pytest.approx(0.0, abs=1e-10)
    assert rep.n_paths == 64
    assert np.all(np.diff(rep.deltas) < 0)


def test_fit_order_sorts_descending():
    deltas = [0.01, 0.1, 0.05]
    errors = [0.1, 0.4, 0.25]
    rep = fit_order(deltas, errors)
    assert rep.deltas == (0.1, 0.05, 0.01)
    assert rep.errors == (0.4, 0.25, 0.1)


def test_fit_order_needs_three_points():
    with pytest.raises(ValueError):
        fit_order([0.1, 0.05], [0.3, 0.2])


def test_convergence_report_validation():
    with pytest.raises(ValueError):
        ConvergenceReport((0.05, 0.1), (0.2, 0.3), 0.5, 0.0, 10, 0.0)
    with pytest.raises(ValueError):
        ConvergenceReport((0.1, 0.05), (0.3, -0.2), 0.5, 0.0, 10, 0.0)
    with pytest.raises(ValueError):
        ConvergenceReport((0.1, 0.05), (0.3, 0.2), float("nan"), 0.0, 10, 0.0)


# ---------------------------------------------------------------- log increments

def test_log_increment_samples_exact_angles():
    angles = [0.0, 0.2, 0.5, 0.4]
    states = [rot2(a) for a in angles]
    path = fake_path(states, 0.1)
    raw = log_increment_samples(path, scale_mode="raw")
    # upper entry of log(R(-a)R(b)) = log R(b - a) is -(b - a)
    assert np.allclose(raw, [-0.2, -0.3, 0.1], atol=1e-12)
    std = log_increment_samples(path)
    assert np.allclose(std, raw / np.sqrt(0.1 / 2.0), atol=1e-12)


def test_log_increment_samples_pooled_size():
    model = brownian_model(3)
    noise = generate_noise(model.d, 40, 0.01, seed=1)
    rec = simulate_path(model, "slem", Rotation(np.eye(3)), noise,
                        StepConfig(delta=0.01))
    assert log_increment_samples(rec).shape == (40 * 3,)


def test_log_increment_samples_standardized_variance():
    model = brownian_model(3)
    noise = generate_noise(model.d, 2000, 0.002, seed=2)
    rec = simulate_path(model, "tasp", Rotation(np.eye(3)), noise,
                        StepConfig(delta=0.002))
    s = log_increment_samples(rec)
    assert abs(s.var() - 1.0) < 0.1
    assert abs(s.mean()) < 0.05


def test_log_increment_samples_rejects_half_turn():
    states = [np.eye(2), rot2(np.pi)]
    path = fake_path(states, 0.1)
    with pytest.raises(LogDomainError):
        log_increment_samples(path)


def test_log_increment_samples_mode_check():
    path = fake_path([np.eye(2), np.eye(2)], 0.1)
    with pytest.raises(ValueError):
        log_increment_samples(path, scale_mode="whitened")


# ---------------------------------------------------------------- qq

def test_qq_positions_and_sorting():
    rng = np.random.default_rng(3)
    samples = rng.standard_normal(101)
    qq = qq_against_normal(samples)
    n = len(samples)
    want = ndtri((np.arange(1, n + 1) - 0.5) / n)
    assert np.array_equal(qq.theory_q, want)
    assert np.array_equal(qq.sample_q, np.sort(samples))
    assert qq.theory_q[n // 2] == pytest.approx(0.0, abs=1e-15)


def test_qq_theory_antisymmetric():
    qq = qq_against_normal(np.arange(50, dtype=float))
    assert np.allclose(qq.theory_q, -qq.theory_q[::-1], atol=1e-13)


def test_qq_rejects_tiny_sample():
    with pytest.raises(ValueError):
        qq_against_normal(np.zeros(9))


def test_qq_data_validation():
    with pytest.raises(ValueError):
        QqData(np.array([0.0, 1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        QqData(np.array([1.0, 0.0]), np.array([0.0, 1.0]))


# ---------------------------------------------------------------- misc

def test_convergence_to_identity_values():
    states = [np.eye(2), rot2(np.pi / 2)]
    path = fake_path(states, 0.5)
    pts = convergence_to_identity(path)
    assert pts[0] == (0.0, 0.0)
    assert pts[1][0] == pytest.approx(0.5)
    assert pts[1][1] == pytest.approx(2.0)  # ||R(pi/2) - I||_F = 2


def test_timing_summary_values():
    a = fake_path([np.eye(2)] * 4, 0.1, nanos=[100.0, 200.0, 300.0])
    b = fake_path([np.eye(2)] * 3, 0.1, nanos=[400.0, 500.0])
    out = timing_summary({"tasp": [a, b]})
    assert out["tasp"]["steps"] == 5
    assert out["tasp"]["mean_ns"] == pytest.approx(300.0)
    assert out["tasp"]["median_ns"] == pytest.approx(300.0)


def test_timing_summary_rejects_missing_diagnostics():
    blank = fake_path([np.eye(2)] * 3, 0.1)
    with pytest.raises(ValueError):
        timing_summary({"slem": [blank]})
    with pytest.raises(ValueError):
        timing_summary({"slem": []})
