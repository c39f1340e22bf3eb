"""Benchmark the compiled kernels against the pure-python fallback.

Runs the hot kernels (correction, contraction-tested update, rotation log,
multiply-and-defect) on both backends and prints per-call microseconds plus
an end-to-end step rate for each backend in a subprocess.

Usage: python benchmarks/backend_bench.py [--sizes 3,10,50] [--repeats 200]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np
import scipy.linalg as sla

from rotasde._backend import get_kernels

MARGIN = 1e-3
LOG_TOL = 1e-8


def rnd_skew(rng, n, spectral):
    a = rng.standard_normal((n, n))
    z = (a - a.T) / 2.0
    return np.ascontiguousarray(z * (spectral / np.linalg.norm(z, 2)))


def per_call_us(fn, repeats):
    fn()  # warm up
    t0 = time.perf_counter_ns()
    for _ in range(repeats):
        fn()
    return (time.perf_counter_ns() - t0) / repeats / 1000.0


def kernel_cases(n, rng):
    z = rnd_skew(rng, n, 0.3)
    r = np.ascontiguousarray(sla.expm(rnd_skew(rng, n, 0.9)))
    g = np.ascontiguousarray(np.eye(n) + z)
    return {
        "correction_exact": lambda k: k.correction_exact(z),
        "correction_taylor5": lambda k: k.correction_taylor(z, 5),
        "tasp_core_exact": lambda k: k.tasp_core(r, z, MARGIN, 0, 0),
        "tasp_core_taylor5": lambda k: k.tasp_core(r, z, MARGIN, 1, 5),
        "logm_raw": lambda k: k.logm_raw(r, LOG_TOL),
        "mul_update": lambda k: k.mul_update(r, g),
    }


def end_to_end_rate(backend, n, steps):
    """Steps per second of a descent-model tangent-step run under the given
    backend, measured in a fresh interpreter so import-time selection applies."""
    code = (
        "import time, numpy as np\n"
        "from rotasde import StepConfig, descent_model, generate_noise, "
        "random_rotation, simulate_path\n"
        f"model = descent_model({n})\n"
        f"r0 = random_rotation({n}, 1)\n"
        f"noise = generate_noise(model.d, {steps}, 0.001, 1, 0)\n"
        "cfg = StepConfig(delta=0.001, record_diagnostics=False)\n"
        "simulate_path(model, 'tasp', r0, noise, cfg)\n"
        "t0 = time.perf_counter()\n"
        "simulate_path(model, 'tasp', r0, noise, cfg)\n"
        f"print({steps} / (time.perf_counter() - t0))\n"
    )
    env = dict(os.environ, ROTASDE_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="3,10,50",
                        help="comma-separated matrix sizes")
    parser.add_argument("--repeats", type=int, default=200,
                        help="calls per measurement")
    parser.add_argument("--steps", type=int, default=2000,
                        help="steps for the end-to-end rate")
    args = parser.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]

    backends = {}
    for name in ("python", "cython"):
        try:
            backends[name] = get_kernels(name)
        except ImportError:
            print(f"note: {name} backend unavailable, skipping")
    if len(backends) < 2:
        print("only one backend present; timing it alone")

    rng = np.random.default_rng(0)
    header = f"{'kernel':<20} {'n':>4} " + "".join(
        f"{name + ' us':>12}" for name in backends) + f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        cases = kernel_cases(n, rng)
        for label, call in cases.items():
            times = {name: per_call_us(lambda k=k: call(k), args.repeats)
                     for name, k in backends.items()}
            row = f"{label:<20} {n:>4} " + "".join(
                f"{times[name]:>12.2f}" for name in backends)
            if len(times) == 2:
                row += f"{times['python'] / times['cython']:>9.1f}x"
            print(row)

    print()
    for name in backends:
        for n in sizes:
            rate = end_to_end_rate(name, n, args.steps)
            print(f"end-to-end descent n={n:<3} {name:<7}: {rate:>10.0f} steps/s")


if __name__ == "__main__":
    main()
