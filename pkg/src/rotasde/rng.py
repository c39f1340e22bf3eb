"""Reproducible stream construction.

Contract: counter-based Philox4x64 keyed by [seed, 2*path_id + purpose] with
purpose 0 = main increments and 1 = rejection resampling, so every (path,
purpose) pair owns an independent stream regardless of scheduling, and coarse/
fine coupled paths share the main stream by construction.
"""
import numpy as np

from .so_n_core import Rotation, pack_skew

PURPOSE_MAIN = 0
PURPOSE_RESAMPLE = 1

# initial-state draws live on a reserved stream far above any realistic
# path_id, so they can never alias a path's increment stream
R0_STREAM = 2**40

GENERATOR_NAME = "philox4x64"


def stream_key(seed, path_id, purpose):
    if purpose not in (PURPOSE_MAIN, PURPOSE_RESAMPLE):
        raise ValueError("purpose must be 0 (main) or 1 (resample)")
    return 2 * path_id + purpose


def make_stream(seed, path_id=0, purpose=PURPOSE_MAIN):
    """Generator for one (seed, path, purpose) stream."""
    return from_key(seed, stream_key(seed, path_id, purpose))


def from_key(seed, stream):
    """Generator for an explicit [seed, stream] Philox key."""
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def random_rotation(n, seed, scale=None):
    """Seeded random rotation: Gaussian skew scaled to spectral norm <= pi/2
    (or the given scale), then exponentiated.  Fixed method so runs are
    reproducible across ports given the same generator."""
    import scipy.linalg

    cap = np.pi / 2 if scale is None else scale
    g = from_key(seed, R0_STREAM)
    z = pack_skew(g.standard_normal(n * (n - 1) // 2), n)
    s = np.linalg.norm(z, 2)
    if s > cap:
        z *= cap / s
    return Rotation(scipy.linalg.expm(z))
