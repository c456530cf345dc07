"""Configuration-driven experiment runner.

Every analysis of the package is exposed as a subcommand taking a config
file; results land in a JSON summary (always) plus CSV detail tables when
the format asks for them.  Exit codes: 0 success, 2 configuration error,
3 analytic gate violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import (ExperimentConfig, estimator_flag, estimator_float, estimator_int,
                     estimator_step, load_config)
from .errors import (ConfigError, EmbeddingError, GateViolation, ModelError,
                     NumericalError, RefinementError)
from .kacrice import (RiceValue, expected_crossings_1d, expected_volume,
                      f_lambda2_mc, f_lambda2_sphere, second_factorial_moment_1d)
from .crofton import (LinePlan, SphereShape, crofton_estimate,
                      deterministic_shape_oracle, estimate_moments)
from .fieldsim import CirculantSampler, count_sign_changes, expected_grid_sign_changes, sample_ensemble
from .rng import make_rng, STREAM_CIRCULANT
from .spectral import DirectionalSpectrum, geman_integral

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_NUMERIC = 4

_SCHEMA = "levelgeom-report/1"


# ---------------------------------------------------------------------------
# report plumbing


def _sanitize(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return obj


def _rice_dict(r: RiceValue) -> dict:
    return {"value": r.value, "method": r.method, "stderr": r.stderr}


def write_summary(out_dir: str, name: str, cfg: ExperimentConfig, results: dict) -> str:
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "schema": _SCHEMA,
        "version": __version__,
        "command": name,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": cfg.resolved,
        "results": _sanitize(results),
    }
    path = os.path.join(out_dir, f"{name}_summary.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def write_table(out_dir: str, name: str, columns, rows) -> str:
    """RFC-4180 CSV with a header row and 17-significant-digit floats."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])
    return path


def _want_csv(cfg: ExperimentConfig) -> bool:
    return cfg.format in ("csv", "both")


def _direction(cfg: ExperimentConfig) -> np.ndarray:
    raw = cfg.estimator["direction"].strip().lower()
    d = cfg.model.d
    if raw == "auto":
        v = np.zeros(d)
        v[0] = 1.0
        return v
    v = np.array([float(x) for x in cfg.estimator["direction"].split()])
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigError("direction must be a nonzero vector")
    return v / n


# ---------------------------------------------------------------------------
# parallel helpers (top level for pickling)


def _chunk_ranges(n: int, chunks: int):
    size = max(1, (n + chunks - 1) // chunks)
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _grid_counts_chunk(args):
    """Crossing counts of exact line samples for realization indices [lo, hi)."""
    model, v, u, T, h, seed, lo, hi, mode = args
    n = int(math.floor(T / h)) + 1
    sampler = CirculantSampler(model, v, h, n)
    counts = np.empty(hi - lo, dtype=np.int64)
    for i in range(lo, hi):
        x = sampler.sample(make_rng(seed, STREAM_CIRCULANT, i), 1)[0]
        counts[i - lo] = count_sign_changes(x, u, mode)
    return counts


def _grid_counts(model, v, u, T, h, seed, n_real, mode, jobs):
    if jobs > 1:
        tasks = [(model, v, u, T, h, seed, lo, hi, mode)
                 for lo, hi in _chunk_ranges(n_real, 4 * jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_grid_counts_chunk, tasks))
        return np.concatenate(parts)
    return _grid_counts_chunk((model, v, u, T, h, seed, 0, n_real, mode))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_lambda2(cfg: ExperimentConfig, out: str) -> dict:
    m = cfg.model.lambda2_matrix()
    results = {
        "entries": m.entries,
        "finite": m.finite,
        "finite_subspace": m.finite_subspace.T,  # one basis vector per row
        "finite_subspace_dimension": m.finite_subspace.shape[1],
    }
    if _want_csv(cfg):
        rows = [[float(x) for x in row] for row in m.entries]
        write_table(out, "lambda2_entries", [f"col{j}" for j in range(m.d)], rows)
    return results


def _cmd_f_lambda2(cfg: ExperimentConfig, out: str) -> dict:
    m = cfg.model.lambda2_matrix()
    sphere = f_lambda2_sphere(m)
    mc = f_lambda2_mc(m, n=estimator_int(cfg, "mc_samples"), seed=cfg.seed)
    agree = None
    if not math.isinf(sphere.value):
        spread = math.hypot(sphere.stderr, mc.stderr)
        agree = abs(sphere.value - mc.value) / spread if spread > 0 else 0.0
    return {"sphere": _rice_dict(sphere), "mc": _rice_dict(mc),
            "discrepancy_in_stderr": agree}


def _cmd_expected_volume(cfg: ExperimentConfig, out: str) -> dict:
    if cfg.domain is None:
        raise ConfigError("expected-volume needs a [domain] section")
    r = expected_volume(cfg.model, cfg.domain)
    return {"expected_volume": _rice_dict(r), "u": cfg.u,
            "lebesgue": cfg.domain.lebesgue}


def _cmd_crossings_1d(cfg: ExperimentConfig, out: str) -> dict:
    v = _direction(cfg)
    T = estimator_float(cfg, "length")
    h = estimator_step(cfg)
    if h is None:
        h = cfg.model.default_step()
    n_real = estimator_int(cfg, "n_realizations")
    counts = _grid_counts(cfg.model, v, cfg.u, T, h, cfg.seed, n_real, "all", cfg.jobs)
    mean = float(counts.mean())
    stderr = float(counts.std(ddof=1) / math.sqrt(n_real))
    lam2 = cfg.model.directional_lambda2(v)
    rate = expected_crossings_1d(lam2, cfg.u, T)
    # the exact grid law is a zero-level identity
    grid_law = expected_grid_sign_changes(cfg.model, v, T, h) if cfg.u == 0.0 else None
    results = {
        "empirical_mean": mean, "empirical_stderr": stderr,
        "crossing_rate_prediction": rate,
        "grid_law_prediction": grid_law,
        "n_realizations": n_real, "T": T, "h": h,
        "z_vs_rate": None if math.isinf(rate) else (mean - rate) / stderr,
    }
    if _want_csv(cfg):
        write_table(out, "crossings_counts", ["realization", "count"],
                    [[i, int(c)] for i, c in enumerate(counts)])
    return results


def _cmd_second_moment_1d(cfg: ExperimentConfig, out: str) -> dict:
    v = _direction(cfg)
    T = estimator_float(cfg, "length")
    mode = cfg.estimator["mode"].strip().lower()
    spec = DirectionalSpectrum(cfg.model, v)
    quad_value = second_factorial_moment_1d(spec, cfg.u, T, mode)
    h = estimator_step(cfg)
    if h is None:
        h = cfg.model.default_step()
    n_real = estimator_int(cfg, "n_realizations")
    counts = _grid_counts(cfg.model, v, cfg.u, T, h, cfg.seed, n_real,
                          "all" if mode == "all" else "up", cfg.jobs)
    fact = counts.astype(float) * (counts - 1.0)
    emp = float(fact.mean())
    stderr = float(fact.std(ddof=1) / math.sqrt(n_real))
    return {
        "quadrature": quad_value, "empirical": emp, "empirical_stderr": stderr,
        "z": (emp - quad_value) / stderr if stderr > 0 else None,
        "mode": mode, "T": T, "h": h, "n_realizations": n_real,
    }


def _cmd_crofton(cfg: ExperimentConfig, out: str) -> dict:
    if cfg.domain is None:
        raise ConfigError("crofton needs a [domain] section")
    refinement = estimator_flag(cfg, "refinement")
    if refinement and not cfg.model.lambda2_matrix().finite:
        raise GateViolation("refinement requires a finite second spectral moment matrix")
    ens = sample_ensemble(cfg.model, estimator_int(cfg, "harmonics"), cfg.seed)
    plan = LinePlan(n_lines=estimator_int(cfg, "n_lines"), domain=cfg.domain,
                    seed=cfg.seed, refinement=refinement, h=estimator_step(cfg))
    est = crofton_estimate(ens, cfg.u, plan)
    if _want_csv(cfg):
        rows = []
        for i, r in enumerate(est.per_line):
            rows.append([i] + [float(x) for x in r.v] + [float(x) for x in r.y]
                        + [float(r.weight), int(r.count), int(r.flagged)])
        d = cfg.model.d
        cols = (["line"] + [f"v{j}" for j in range(d)] + [f"y{j}" for j in range(d)]
                + ["weight", "count", "flagged"])
        write_table(out, "crofton_lines", cols, rows)
    return {"estimate": est.value, "stderr": est.stderr,
            "n_lines": est.n_lines, "n_flagged": est.n_flagged, "u": cfg.u}


def _cmd_moments(cfg: ExperimentConfig, out: str) -> dict:
    if cfg.domain is None:
        raise ConfigError("moments needs a [domain] section")
    plan = LinePlan(n_lines=estimator_int(cfg, "n_lines"), domain=cfg.domain,
                    seed=cfg.seed, refinement=estimator_flag(cfg, "refinement"),
                    h=estimator_step(cfg))
    report = estimate_moments(cfg.model, cfg.u, plan,
                              n_realizations=estimator_int(cfg, "n_realizations"),
                              M=estimator_int(cfg, "harmonics"), seed=cfg.seed,
                              orders=estimator_int(cfg, "orders"), jobs=cfg.jobs)
    if _want_csv(cfg):
        write_table(out, "moment_realizations", ["realization", "estimate"],
                    [[i, float(x)] for i, x in enumerate(report.values)])
    flagged_fraction = report.n_flagged_lines / (report.n_realizations * plan.n_lines)
    return {
        "mean": report.mean, "mean_stderr": report.mean_stderr,
        "moments": {str(k): {"estimate": v[0], "ci_lo": v[1], "ci_hi": v[2]}
                    for k, v in report.moments.items()},
        "half_sample_moments": {str(k): v for k, v in report.half_moments.items()},
        "stability_rel_change": {str(k): v for k, v in report.stability.items()},
        "n_realizations": report.n_realizations,
        "flagged_lines": report.n_flagged_lines,
        "flagged_fraction": flagged_fraction,
    }


def _cmd_diverge(cfg: ExperimentConfig, out: str) -> dict:
    v = _direction(cfg)
    T = estimator_float(cfg, "length")
    n_real = estimator_int(cfg, "n_realizations")
    sweep = [float(x) for x in cfg.estimator["h_sweep"].split()]
    if len(sweep) < 2:
        raise ConfigError("h_sweep needs at least two steps")
    rows = []
    for h in sweep:
        counts = _grid_counts(cfg.model, v, 0.0, T, h, cfg.seed, n_real, "all", cfg.jobs)
        mean = float(counts.mean())
        stderr = float(counts.std(ddof=1) / math.sqrt(n_real))
        oracle = expected_grid_sign_changes(cfg.model, v, T, h)
        rows.append({"h": h, "mean": mean, "stderr": stderr, "oracle": oracle,
                     "z": (mean - oracle) / stderr if stderr > 0 else None})
    means = np.array([r["mean"] for r in rows])
    hs = np.array(sweep)
    slope = float(np.polyfit(np.log(hs), np.log(means), 1)[0])
    increasing = bool(np.all(np.diff(means[np.argsort(hs)[::-1]]) > 0))
    if _want_csv(cfg):
        write_table(out, "diverge_sweep", ["h", "mean", "stderr", "oracle"],
                    [[r["h"], r["mean"], r["stderr"], r["oracle"]] for r in rows])
    return {"sweep": rows, "loglog_slope": slope,
            "strictly_increasing_as_h_shrinks": increasing,
            "T": T, "n_realizations": n_real}


def _cmd_geman(cfg: ExperimentConfig, out: str) -> dict:
    v = _direction(cfg)
    spec = DirectionalSpectrum(cfg.model, v)
    delta = estimator_float(cfg, "delta")
    a = estimator_float(cfg, "a")
    lam2 = spec.lambda2
    results = {"lambda2_directional": lam2, "delta": delta, "a": a}
    results["moment_2_plus_delta"] = cfg.model.moment_2_plus_delta(delta)
    results["directional_moment_2_plus_delta"] = spec.moment_2_plus_delta(delta)
    if math.isinf(lam2):
        raise GateViolation("Geman integral requires a finite directional second moment")
    results["geman_integral"] = geman_integral(spec, a)
    return results


def _cmd_shape_oracle(cfg: ExperimentConfig, out: str) -> dict:
    if cfg.domain is None:
        raise ConfigError("shape-oracle needs a [domain] section")
    kind = cfg.estimator["shape"].strip().lower()
    if kind != "sphere":
        raise ConfigError(f"unsupported oracle shape {kind!r}")
    radius = estimator_float(cfg, "shape_radius")
    d = cfg.domain.d
    shape = SphereShape(np.zeros(d), radius)
    plan = LinePlan(n_lines=estimator_int(cfg, "n_lines"), domain=cfg.domain,
                    seed=cfg.seed, refinement=False)
    est = deterministic_shape_oracle(shape, plan)
    exact = shape.surface_measure(d)
    return {"estimate": est.value, "stderr": est.stderr, "exact": exact,
            "abs_error": abs(est.value - exact),
            "rel_error": abs(est.value - exact) / exact,
            "z": (est.value - exact) / est.stderr if est.stderr > 0 else None,
            "n_lines": est.n_lines}


_COMMANDS = {
    "lambda2": _cmd_lambda2,
    "f-lambda2": _cmd_f_lambda2,
    "expected-volume": _cmd_expected_volume,
    "crossings-1d": _cmd_crossings_1d,
    "second-moment-1d": _cmd_second_moment_1d,
    "crofton": _cmd_crofton,
    "moments": _cmd_moments,
    "diverge": _cmd_diverge,
    "geman": _cmd_geman,
    "shape-oracle": _cmd_shape_oracle,
}


def _mark_incomplete(out: str, command: str, cfg: ExperimentConfig, kind: str, exc) -> None:
    """Failed runs leave an explicit marker so partial CSVs are never
    mistaken for a finished experiment."""
    try:
        os.makedirs(out, exist_ok=True)
        payload = {"schema": _SCHEMA, "version": __version__, "command": command,
                   "status": "incomplete", "error_kind": kind, "error": str(exc),
                   "config": cfg.resolved}
        with open(os.path.join(out, f"{command}_incomplete.json"), "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError:
        pass


def run(command: str, cfg: ExperimentConfig) -> tuple[int, dict | None]:
    """Execute one subcommand; returns (exit code, results dict or None)."""
    out = cfg.out
    try:
        results = _COMMANDS[command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _mark_incomplete(out, command, cfg, "config", exc)
        return EXIT_CONFIG, None
    except (GateViolation, ModelError) as exc:
        print(f"gate violation: {exc}", file=sys.stderr)
        _mark_incomplete(out, command, cfg, "gate", exc)
        return EXIT_GATE, None
    except (EmbeddingError, NumericalError, RefinementError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _mark_incomplete(out, command, cfg, "numerical", exc)
        return EXIT_NUMERIC, None
    write_summary(out, command, cfg, results)
    return EXIT_OK, results


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelgeom",
        description="Level-set geometry experiments for stationary Gaussian fields.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override [run] seed")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--jobs", type=int, default=None, help="override worker count")
        p.add_argument("--format", choices=["json", "csv", "both"], default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "out": args.out, "jobs": args.jobs,
                 "format": args.format}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, _ = run(args.command, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
