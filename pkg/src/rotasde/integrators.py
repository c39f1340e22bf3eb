"""One-step maps and path simulation: the tangent-space scheme with rejection
resampling, the exponential-map baseline, and the Euclidean baseline, plus
coupled Brownian increment tables for convergence studies."""
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import rng as rng_mod
from ._backend import kernels
from .config import DEFAULT_TOLS
from .sde_model import effective_ito_drift
from .so_n_core import (DimensionError, Rotation, SkewMatrix, _as_matrix,
                        parse_sqrt_method)


class RetriesExhaustedError(RuntimeError):
    """Every redraw violated the contraction bound: delta is too large for the
    model's noise scale."""


class NoiseTable:
    """Brownian increments on a fixed grid: m_steps x d entries, each
    Normal(0, delta).  Column j over disjoint steps is one driver's path."""

    def __init__(self, d, m_steps, delta, increments, seed, stream=0):
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (m_steps, d):
            raise DimensionError(
                f"increments shape {increments.shape} != ({m_steps}, {d})")
        if delta <= 0:
            raise ValueError("delta must be positive")
        self.d = d
        self.m_steps = m_steps
        self.delta = delta
        self.increments = increments
        self.seed = seed
        self.stream = stream


@dataclass
class StepConfig:
    delta: float
    sqrt_method: str = "exact"
    pd_margin: float = DEFAULT_TOLS.pd_margin
    max_retries: int = 100
    record_diagnostics: bool = True

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        parse_sqrt_method(self.sqrt_method)


class PathRecord:
    """One trajectory: times, states, and per-step diagnostics.

    state_array is the (m_steps+1, n, n) stack including the initial state;
    defects/retries/step_nanos have one entry per step.
    """

    def __init__(self, times, state_array, defects, retries, step_nanos,
                 scheme, delta):
        m = len(times) - 1
        if not (len(state_array) == m + 1 == len(defects) + 1
                == len(retries) + 1 == len(step_nanos) + 1):
            raise ValueError("inconsistent record lengths")
        self.times = np.asarray(times, dtype=float)
        self.state_array = np.asarray(state_array, dtype=float)
        self.defects = np.asarray(defects, dtype=float)
        self.retries = np.asarray(retries, dtype=np.int64)
        self.step_nanos = np.asarray(step_nanos, dtype=np.int64)
        self.scheme = scheme
        self.delta = delta

    @property
    def m_steps(self):
        return len(self.times) - 1

    @property
    def states(self):
        """States as checked Rotations (euclidean paths stay raw matrices)."""
        if self.scheme == "euclidean":
            return [m for m in self.state_array]
        tol = DEFAULT_TOLS.orth_tol
        if len(self.defects):
            tol = max(tol, 2.0 * float(np.max(self.defects)))
        return [Rotation(m, orth_tol=tol) for m in self.state_array]


def generate_noise(d, m_steps, delta, seed, stream=0):
    """Deterministic table of Normal(0, delta) increments on stream
    [seed, stream]; main path streams are the even indices."""
    if m_steps < 1:
        raise ValueError("m_steps must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    g = rng_mod.from_key(seed, stream)
    inc = g.standard_normal((m_steps, d)) * np.sqrt(delta)
    return NoiseTable(d, m_steps, delta, inc, seed, stream)


def coarsen(noise, factor):
    """Sum blocks of `factor` consecutive increment rows: the same Brownian
    path on a grid `factor` times coarser."""
    if factor < 1 or noise.m_steps % factor:
        raise ValueError(f"factor {factor} does not divide {noise.m_steps} steps")
    inc = noise.increments.reshape(noise.m_steps // factor, factor, noise.d).sum(axis=1)
    return NoiseTable(noise.d, noise.m_steps // factor, noise.delta * factor,
                      inc, noise.seed, noise.stream)


def _skew_drift_raw(model, m, t):
    if model.skew_drift is not None:
        return model.skew_drift(m, t)
    return effective_ito_drift(model, m, t).skew_part.entries


def _noise_combo_raw(model, m, t, dw):
    if model.noise_combo is not None:
        return model.noise_combo(m, t, dw)
    acc = np.zeros((model.n, model.n))
    for j in range(model.d):
        acc += dw[j] * model.diffusion(m, t, j)
    return acc


def _z_raw(model, m, t, delta, dw):
    z = _skew_drift_raw(model, m, t) * delta + _noise_combo_raw(model, m, t, dw)
    return np.ascontiguousarray((z - z.T) / 2)


def tangent_increment(model, r, t, delta, eps):
    """Z = (B_{o,I} - (1/2) sum B_j^2) delta + sum_j B_j sqrt(delta) eps_j.

    The drift factor is exactly the skew part of B_{o,I} (the symmetric
    pinning term is cancelled by the B_j^2 sum), so Z is skew by construction.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (model.d,):
        raise DimensionError(f"expected {model.d} normals, got shape {eps.shape}")
    m = _as_matrix(r)
    return SkewMatrix(_z_raw(model, m, t, delta, np.sqrt(delta) * eps))


def _method_code(cfg):
    kind, order = parse_sqrt_method(cfg.sqrt_method)
    return (0, 0) if kind == "exact" else (1, order)


def _tasp_raw(model, m, t, cfg, dw, resample):
    """Shared tangent-step core: returns (state, defect, retries).

    resample() supplies replacement increment rows when the contraction test
    rejects a draw; raises RetriesExhaustedError past cfg.max_retries.
    """
    mcode, order = _method_code(cfg)
    z = _z_raw(model, m, t, cfg.delta, dw)
    out, d, ok = kernels.tasp_core(m, z, cfg.pd_margin, mcode, order)
    tries = 0
    while not ok:
        if tries >= cfg.max_retries:
            raise RetriesExhaustedError(
                f"contraction test failed {tries} redraws at t={t:.6g}; "
                "reduce delta")
        tries += 1
        z = _z_raw(model, m, t, cfg.delta, resample())
        out, d, ok = kernels.tasp_core(m, z, cfg.pd_margin, mcode, order)
    return out, d, tries


def tasp_step(model, r, t, cfg, rng):
    """One tangent-space step R (I + Z + C) with rejection resampling.

    Returns (Rotation, diagnostics); with the exact sqrt the state passes the
    default rotation check, with a truncated sqrt a relaxed 1e-5 bound is
    applied.
    """
    m = np.ascontiguousarray(_as_matrix(r))
    dw = rng.standard_normal(model.d) * np.sqrt(cfg.delta)
    t0 = time.perf_counter_ns()
    out, defect, tries = _tasp_raw(
        model, m, t, cfg, dw,
        lambda: rng.standard_normal(model.d) * np.sqrt(cfg.delta))
    nanos = time.perf_counter_ns() - t0
    mcode, _ = _method_code(cfg)
    tol = None if mcode == 0 else 1e-5
    diag = {"defect": defect, "retries": tries, "step_nanos": nanos}
    return Rotation(out, orth_tol=tol), diag


def slem_step(model, r, t, cfg, rng):
    """One exponential-map step R exp(Z) with the same draw contract."""
    m = np.ascontiguousarray(_as_matrix(r))
    dw = rng.standard_normal(model.d) * np.sqrt(cfg.delta)
    t0 = time.perf_counter_ns()
    z = _z_raw(model, m, t, cfg.delta, dw)
    out, defect = kernels.mul_update(m, np.ascontiguousarray(scipy.linalg.expm(z)))
    nanos = time.perf_counter_ns() - t0
    diag = {"defect": defect, "retries": 0, "step_nanos": nanos}
    return Rotation(out), diag


def euclidean_em_step(model, m, t, cfg, rng):
    """Plain Euler-Maruyama in the ambient space, no correction: exhibits the
    drift off the manifold.  Input and output are raw matrices."""
    m = np.ascontiguousarray(_as_matrix(m), dtype=float)
    dw = rng.standard_normal(model.d) * np.sqrt(cfg.delta)
    drift = effective_ito_drift(model, m, t).value
    return m + m @ (drift * cfg.delta) + m @ _noise_combo_raw(model, m, t, dw)


def simulate_path(model, scheme, r0, noise, cfg):
    """Iterate one scheme over a noise table; returns the full PathRecord.

    Rejected tangent-step draws are replaced from the dedicated resample
    stream [noise.seed, noise.stream + 1], so the base table stays valid for
    scheme comparison and coupling.
    """
    if scheme not in ("tasp", "slem", "euclidean"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if noise.d != model.d:
        raise DimensionError(f"noise has d={noise.d}, model d={model.d}")
    if abs(noise.delta - cfg.delta) > 1e-12 * max(1.0, cfg.delta):
        raise ValueError("cfg.delta and noise.delta disagree")
    m = np.ascontiguousarray(_as_matrix(r0), dtype=float)
    n = model.n
    steps = noise.m_steps
    states = np.empty((steps + 1, n, n))
    states[0] = m
    defects = np.zeros(steps)
    retries = np.zeros(steps, dtype=np.int64)
    nanos = np.zeros(steps, dtype=np.int64)
    record = cfg.record_diagnostics
    resample_rng = None
    sqd = np.sqrt(cfg.delta)

    def resample():
        nonlocal resample_rng
        if resample_rng is None:
            resample_rng = rng_mod.from_key(noise.seed, noise.stream + 1)
        return resample_rng.standard_normal(model.d) * sqd

    if scheme == "slem":
        expm = scipy.linalg.expm
    for k in range(steps):
        t = k * cfg.delta
        dw = noise.increments[k]
        t0 = time.perf_counter_ns() if record else 0
        if scheme == "tasp":
            m, dft, tr = _tasp_raw(model, m, t, cfg, dw, resample)
            retries[k] = tr
        elif scheme == "slem":
            z = _z_raw(model, m, t, cfg.delta, dw)
            m, dft = kernels.mul_update(m, np.ascontiguousarray(expm(z)))
        else:
            drift = effective_ito_drift(model, m, t).value
            m = m + m @ (drift * cfg.delta) + m @ _noise_combo_raw(model, m, t, dw)
            dft = kernels.defect_of(np.ascontiguousarray(m))
        if record:
            nanos[k] = time.perf_counter_ns() - t0
            defects[k] = dft
        states[k + 1] = m
    times = np.arange(steps + 1) * cfg.delta
    return PathRecord(times, states, defects, retries, nanos, scheme, cfg.delta)
