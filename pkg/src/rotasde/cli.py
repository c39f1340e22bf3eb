"""Command-line entry point: config-driven experiments with reproducible,
checksummed outputs.

Config is one JSON document; the flags --seed, --threads and --out override
the corresponding config fields.  Exit codes: 0 success, 2 config error,
3 numerical failure, 4 I/O error.
"""
import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis, rng as rng_mod
from ._backend import backend_name
from .integrators import (RetriesExhaustedError, StepConfig, coarsen,
                          generate_noise, simulate_path)
from .sde_model import brownian_model, descent_model
from .so_n_core import (LogDomainError, NotContractionError, Rotation,
                        parse_sqrt_method)


class ConfigError(ValueError):
    pass


EXPERIMENTS = ("simulate", "converge", "brownian-stats", "check-geometry", "benchmark")
SCHEMES = ("tasp", "slem", "euclidean")

DEFAULTS = {
    "model": "brownian",
    "n": 3,
    "delta": 0.001,
    "t_final": 1.0,
    "n_paths": 1,
    "seed": 0,
    "schemes": ["tasp"],
    "sqrt_method": "exact",
    "drift_source": "converted",
    "output_dir": "out",
    "r0": "identity",
    "threads": 1,
    "record_timing": False,
    "max_retries": 100,
    "pd_margin": None,
    "deltas": None,
    "ref_delta": None,
}


def load_config(path, overrides):
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(DEFAULTS) - {"experiment"}
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    for key, val in overrides.items():
        if val is not None:
            cfg[key] = val
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg["model"] not in ("brownian", "descent"):
        raise ConfigError(f"model must be brownian|descent, got {cfg['model']!r}")
    if not isinstance(cfg["n"], int) or cfg["n"] < 2:
        raise ConfigError("n must be an integer >= 2")
    if not isinstance(cfg["n_paths"], int) or cfg["n_paths"] < 1:
        raise ConfigError("n_paths must be an integer >= 1")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if cfg["delta"] <= 0:
        raise ConfigError("delta must be positive")
    steps = cfg["t_final"] / cfg["delta"]
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        raise ConfigError(f"t_final/delta must be a positive integer, got {steps}")
    schemes = cfg["schemes"]
    if (not isinstance(schemes, list) or not schemes
            or any(s not in SCHEMES for s in schemes)):
        raise ConfigError(f"schemes must be a nonempty subset of {SCHEMES}")
    try:
        parse_sqrt_method(cfg["sqrt_method"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if cfg["drift_source"] not in ("converted", "printed"):
        raise ConfigError("drift_source must be converted|printed")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    r0 = cfg["r0"]
    if not (r0 in ("identity", "random") or isinstance(r0, list)):
        raise ConfigError("r0 must be 'identity', 'random', or an explicit matrix")
    if cfg["deltas"] is not None:
        if len(cfg["deltas"]) < 3:
            raise ConfigError("converge needs at least 3 deltas")
        if cfg["ref_delta"] is None:
            raise ConfigError("converge needs ref_delta")
        for d in cfg["deltas"]:
            ratio = d / cfg["ref_delta"]
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ConfigError(f"ref_delta must divide every tested delta (got {d})")


def _fmt(x):
    return f"{float(x):.17g}"


def _model_of(cfg):
    if cfg["model"] == "brownian":
        return brownian_model(cfg["n"])
    return descent_model(cfg["n"], cfg["drift_source"])


def _r0_of(cfg):
    r0 = cfg["r0"]
    n = cfg["n"]
    if r0 == "identity":
        return Rotation(np.eye(n))
    if r0 == "random":
        return rng_mod.random_rotation(n, cfg["seed"])
    arr = np.asarray(r0, dtype=float)
    if arr.shape != (n, n):
        raise ConfigError(f"explicit r0 must be {n}x{n}")
    try:
        return Rotation(arr)
    except ValueError as e:
        raise ConfigError(f"explicit r0 rejected: {e}") from None


def _step_config(cfg, delta=None):
    kw = dict(delta=cfg["delta"] if delta is None else delta,
              sqrt_method=cfg["sqrt_method"],
              max_retries=cfg["max_retries"])
    if cfg["pd_margin"] is not None:
        kw["pd_margin"] = cfg["pd_margin"]
    return StepConfig(**kw)


def _pool_map(threads, fn, items):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_outputs(out_dir, cfg, writers, extras=None):
    """Run the per-file writer callables, then the manifest with checksums."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    names = []
    for name, writer in writers:
        writer(out / name)
        names.append(name)
    manifest = {
        "config": {k: v for k, v in sorted(cfg.items())},
        "version": __version__,
        "backend": backend_name(),
        "generator": {
            "name": rng_mod.GENERATOR_NAME,
            "key_scheme": "[seed, 2*path_id + purpose], purpose 0=main 1=resample; "
                          f"r0 stream {rng_mod.R0_STREAM}",
        },
        "outputs": {name: _sha256(out / name) for name in names},
        "wall_seconds": time.perf_counter() - t0,
    }
    if extras:
        manifest.update(extras)
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def cmd_simulate(cfg):
    if len(cfg["schemes"]) != 1:
        raise ConfigError("simulate runs exactly one scheme")
    scheme = cfg["schemes"][0]
    model = _model_of(cfg)
    r0 = _r0_of(cfg)
    steps = round(cfg["t_final"] / cfg["delta"])
    scfg = _step_config(cfg)

    def run(path_id):
        noise = generate_noise(model.d, steps, cfg["delta"], cfg["seed"], 2 * path_id)
        return simulate_path(model, scheme, r0, noise, scfg)

    records = _pool_map(cfg["threads"], run, range(cfg["n_paths"]))
    n = cfg["n"]
    state_cols = [f"s_{i}_{j}" for i in range(n) for j in range(n)]

    def write_trajectory(path):
        header = ["path_id", "step", "time"] + state_cols + ["defect", "retries", "step_nanos"]
        rows = []
        for pid, rec in enumerate(records):
            for m in range(1, rec.m_steps + 1):
                nanos = rec.step_nanos[m - 1] if cfg["record_timing"] else 0
                rows.append([str(pid), str(m), _fmt(rec.times[m])]
                            + [_fmt(v) for v in rec.state_array[m].ravel()]
                            + [_fmt(rec.defects[m - 1]), str(rec.retries[m - 1]),
                               str(nanos)])
        _write_csv(path, header, rows)

    _write_outputs(cfg["output_dir"], cfg, [("trajectory.csv", write_trajectory)])
    return 0


def cmd_converge(cfg):
    if cfg["deltas"] is None:
        raise ConfigError("converge needs a deltas list")
    if "euclidean" in cfg["schemes"]:
        raise ConfigError("converge supports tasp and slem only")
    deltas = sorted(cfg["deltas"], reverse=True)
    ref_delta = cfg["ref_delta"]
    model = _model_of(cfg)
    r0 = _r0_of(cfg)
    ref_steps = round(cfg["t_final"] / ref_delta)
    if abs(cfg["t_final"] / ref_delta - ref_steps) > 1e-9:
        raise ConfigError("t_final/ref_delta must be an integer")
    schemes = cfg["schemes"]

    def run(path_id):
        fine = generate_noise(model.d, ref_steps, ref_delta, cfg["seed"], 2 * path_id)
        ref = simulate_path(model, "tasp", r0, fine, _step_config(cfg, ref_delta))
        sups = {}
        for delta in deltas:
            coarse_noise = coarsen(fine, round(delta / ref_delta))
            for scheme in schemes:
                rec = simulate_path(model, scheme, r0, coarse_noise,
                                    _step_config(cfg, delta))
                sups[(scheme, delta)] = analysis.pathwise_sup_sq(rec, ref)
        return sups

    all_sups = _pool_map(cfg["threads"], run, range(cfg["n_paths"]))
    errors = {}
    for key in all_sups[0]:
        errors[key] = float(np.sqrt(np.mean([s[key] for s in all_sups])))

    reports = {}
    for scheme in schemes:
        errs = [errors[(scheme, d)] for d in deltas]
        reports[scheme] = analysis.fit_order(deltas, errs, cfg["n_paths"])

    def write_convergence(path):
        rows = [[_fmt(d), _fmt(errors[(scheme, d)]), str(cfg["n_paths"]), scheme]
                for scheme in schemes for d in deltas]
        _write_csv(path, ["delta", "error", "n_paths", "scheme"], rows)

    def write_order(path):
        doc = {scheme: {"slope": rep.slope, "stderr": rep.stderr_slope,
                        "intercept": rep.intercept,
                        "deltas": list(rep.deltas), "errors": list(rep.errors)}
               for scheme, rep in reports.items()}
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")

    _write_outputs(cfg["output_dir"], cfg,
                   [("convergence.csv", write_convergence), ("order.json", write_order)])
    for scheme, rep in reports.items():
        print(f"{scheme}: slope {rep.slope:.4f} (stderr {rep.stderr_slope:.4f})")
    return 0


def cmd_brownian_stats(cfg):
    if cfg["model"] != "brownian":
        raise ConfigError("brownian-stats requires model=brownian")
    model = _model_of(cfg)
    r0 = _r0_of(cfg)
    steps = round(cfg["t_final"] / cfg["delta"])
    scfg = _step_config(cfg)

    def run(path_id):
        noise = generate_noise(model.d, steps, cfg["delta"], cfg["seed"], 2 * path_id)
        rec = simulate_path(model, cfg["schemes"][0], r0, noise, scfg)
        return analysis.log_increment_samples(rec)

    samples = np.concatenate(_pool_map(cfg["threads"], run, range(cfg["n_paths"])))
    qq = analysis.qq_against_normal(samples)
    variance = float(np.var(samples))

    def write_qq(path):
        rows = [[_fmt(t), _fmt(s)] for t, s in zip(qq.theory_q, qq.sample_q)]
        _write_csv(path, ["theory_q", "sample_q"], rows)

    def write_variance(path):
        with open(path, "w") as f:
            json.dump({"variance": variance, "n_samples": int(samples.size)}, f,
                      indent=2, sort_keys=True)
            f.write("\n")

    _write_outputs(cfg["output_dir"], cfg,
                   [("qq.csv", write_qq), ("variance.json", write_variance)])
    print(f"pooled standardized variance {variance:.4f} over {samples.size} samples")
    return 0


def cmd_check_geometry(cfg):
    model = _model_of(cfg)
    r0 = _r0_of(cfg)
    steps = round(cfg["t_final"] / cfg["delta"])
    scfg = _step_config(cfg)
    schemes = cfg["schemes"]
    noise = generate_noise(model.d, steps, cfg["delta"], cfg["seed"], 0)
    records = {s: simulate_path(model, s, r0, noise, scfg) for s in schemes}

    def write_defect(path):
        header = ["time"] + list(schemes)
        rows = []
        for m in range(1, steps + 1):
            rows.append([_fmt(m * cfg["delta"])]
                        + [_fmt(records[s].defects[m - 1]) for s in schemes])
        _write_csv(path, header, rows)

    extras = {"max_defect": {s: float(np.max(records[s].defects)) for s in schemes}}
    _write_outputs(cfg["output_dir"], cfg, [("defect.csv", write_defect)], extras)
    for s in schemes:
        print(f"{s}: max defect {extras['max_defect'][s]:.3e}")
    return 0


def cmd_benchmark(cfg):
    if not {"tasp", "slem"} <= set(cfg["schemes"]):
        raise ConfigError("benchmark needs both tasp and slem in schemes")
    warmup = 100
    steps = round(cfg["t_final"] / cfg["delta"])
    if steps - warmup < 10_000:
        print(f"warning: only {max(steps - warmup, 0)} measured steps "
              "(benchmark protocol wants >= 10000)", file=sys.stderr)
    if steps <= warmup:
        raise ConfigError(f"benchmark needs more than {warmup} steps")
    model = _model_of(cfg)
    r0 = _r0_of(cfg)
    scfg = _step_config(cfg)
    stats = {}
    for scheme in cfg["schemes"]:
        noise = generate_noise(model.d, steps, cfg["delta"], cfg["seed"], 0)
        rec = simulate_path(model, scheme, r0, noise, scfg)
        measured = rec.step_nanos[warmup:]
        stats[scheme] = {"mean_ns": float(np.mean(measured)),
                         "median_ns": float(np.median(measured)),
                         "steps": int(measured.size)}

    def write_timing(path):
        rows = [[s, str(cfg["n"]), _fmt(v["mean_ns"]), _fmt(v["median_ns"]),
                 str(v["steps"])] for s, v in stats.items()]
        _write_csv(path, ["scheme", "n", "mean_ns", "median_ns", "steps"], rows)

    ratio = stats["tasp"]["mean_ns"] / stats["slem"]["mean_ns"]
    extras = {"ratio_tasp_over_slem": ratio}
    _write_outputs(cfg["output_dir"], cfg, [("timing.csv", write_timing)], extras)
    print(f"tasp/slem mean step-time ratio: {ratio:.3f}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "brownian-stats": cmd_brownian_stats,
    "check-geometry": cmd_check_geometry,
    "benchmark": cmd_benchmark,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rotasde",
        description="Simulate multiplicative SDEs on SO(n) with geometry-preserving schemes.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "threads": args.threads,
                                        "output_dir": args.out})
        return COMMANDS[args.experiment](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (RetriesExhaustedError, LogDomainError, NotContractionError,
            ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
