"""Experiment configuration: flat sectioned key-value files.

The format is INI-style with one level of sections and no nesting:

    [model]
    family = isotropic_gaussian
    dimension = 2
    scale = 1.0

    [domain]
    kind = box
    lower = 0 0
    upper = 1 1

    [level]
    u = 0.0

    [estimator]
    harmonics = 512
    n_lines = 400
    n_realizations = 200
    h = auto
    refinement = on

    [run]
    seed = 1
    jobs = 1

Unknown sections or keys are rejected before any computation runs, and the
fully resolved configuration (defaults included) is embedded in every
report.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ModelError
from .kacrice import Ball, Box, LevelDomain
from .spectral import SpectralModel, model_from_config

# keys of the model section depend on the family and are validated by
# model_from_config; the rest are fixed per section
_DOMAIN_KEYS = {"kind", "lower", "upper", "center", "radius", "dimension"}
_LEVEL_KEYS = {"u"}
_ESTIMATOR_KEYS = {"harmonics", "n_lines", "n_realizations", "h", "refinement",
                   "mc_samples", "length", "delta", "a", "orders", "h_sweep",
                   "direction", "mode", "shape", "shape_radius"}
_RUN_KEYS = {"seed", "jobs", "out", "format"}

_ESTIMATOR_DEFAULTS = {
    "harmonics": "512",
    "n_lines": "400",
    "n_realizations": "200",
    "h": "auto",
    "refinement": "on",
    "mc_samples": "1000000",
    "length": "10.0",
    "delta": "0.5",
    "a": "1.0",
    "orders": "4",
    "h_sweep": "1e-2 1e-3 1e-4 1e-5",
    "direction": "auto",
    "mode": "all",
    "shape": "sphere",
    "shape_radius": "1.0",
}
_RUN_DEFAULTS = {"seed": "0", "jobs": str(os.cpu_count() or 1), "out": ".", "format": "json"}


@dataclass(eq=False)
class ExperimentConfig:
    """Validated configuration with every default made explicit."""

    model: SpectralModel
    domain: LevelDomain | None
    u: float
    estimator: dict
    seed: int
    jobs: int
    out: str
    format: str
    resolved: dict  # section -> {key: string value}, embeddable in reports


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split()])
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}") from exc


def _parse_domain(items: dict) -> LevelDomain | None:
    unknown = set(items) - _DOMAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown domain keys: {sorted(unknown)}")
    kind = items.get("kind")
    if kind is None:
        raise ConfigError("domain section needs a 'kind'")
    if kind == "box":
        if "lower" not in items or "upper" not in items:
            raise ConfigError("box domain needs 'lower' and 'upper'")
        region = Box(_parse_vector(items["lower"]), _parse_vector(items["upper"]))
    elif kind == "ball":
        if "radius" not in items:
            raise ConfigError("ball domain needs 'radius'")
        if "center" in items:
            center = _parse_vector(items["center"])
        elif "dimension" in items:
            center = np.zeros(int(items["dimension"]))
        else:
            raise ConfigError("ball domain needs 'center' or 'dimension'")
        region = Ball(center, float(items["radius"]))
    else:
        raise ConfigError(f"unknown domain kind {kind!r}")
    return region


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a config file; ``overrides`` patches [run] keys."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")

    known_sections = {"model", "domain", "level", "estimator", "run"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    if "model" not in parser:
        raise ConfigError("config needs a [model] section")

    model_items = dict(parser.items("model"))
    try:
        model = model_from_config(model_items)
    except ModelError as exc:
        raise ConfigError(str(exc)) from exc

    region = None
    if "domain" in parser:
        region = _parse_domain(dict(parser.items("domain")))
        if region.d != model.d:
            raise ConfigError(
                f"domain dimension {region.d} does not match model dimension {model.d}")

    u = 0.0
    if "level" in parser:
        items = dict(parser.items("level"))
        unknown = set(items) - _LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown level keys: {sorted(unknown)}")
        try:
            u = float(items.get("u", "0"))
        except ValueError as exc:
            raise ConfigError(f"bad level: {items.get('u')!r}") from exc

    est = dict(_ESTIMATOR_DEFAULTS)
    if "estimator" in parser:
        items = dict(parser.items("estimator"))
        unknown = set(items) - _ESTIMATOR_KEYS
        if unknown:
            raise ConfigError(f"unknown estimator keys: {sorted(unknown)}")
        est.update(items)

    run = dict(_RUN_DEFAULTS)
    if "run" in parser:
        items = dict(parser.items("run"))
        unknown = set(items) - _RUN_KEYS
        if unknown:
            raise ConfigError(f"unknown run keys: {sorted(unknown)}")
        run.update(items)
    if overrides:
        run.update({k: str(v) for k, v in overrides.items() if v is not None})

    if run["format"] not in ("json", "csv", "both"):
        raise ConfigError(f"unknown format {run['format']!r}")

    resolved = {
        "model": model.to_config(),
        "level": {"u": repr(u)},
        "estimator": dict(est),
        "run": dict(run),
    }
    if region is not None:
        if isinstance(region, Box):
            resolved["domain"] = {"kind": "box",
                                  "lower": " ".join(repr(float(x)) for x in region.lower),
                                  "upper": " ".join(repr(float(x)) for x in region.upper)}
        else:
            resolved["domain"] = {"kind": "ball",
                                  "center": " ".join(repr(float(x)) for x in region.center),
                                  "radius": repr(float(region.radius))}

    domain = LevelDomain(u, region) if region is not None else None
    try:
        seed = int(run["seed"])
        jobs = int(run["jobs"])
    except ValueError as exc:
        raise ConfigError(f"bad run key: {exc}") from exc
    return ExperimentConfig(model=model, domain=domain, u=u, estimator=est,
                            seed=seed, jobs=jobs, out=run["out"],
                            format=run["format"], resolved=resolved)


def estimator_int(cfg: ExperimentConfig, key: str) -> int:
    try:
        return int(cfg.estimator[key])
    except ValueError as exc:
        raise ConfigError(f"estimator key {key} must be an integer") from exc


def estimator_float(cfg: ExperimentConfig, key: str) -> float:
    try:
        return float(cfg.estimator[key])
    except ValueError as exc:
        raise ConfigError(f"estimator key {key} must be a number") from exc


def estimator_flag(cfg: ExperimentConfig, key: str) -> bool:
    val = cfg.estimator[key].strip().lower()
    if val in ("on", "true", "1", "yes"):
        return True
    if val in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"estimator key {key} must be on/off")


def estimator_step(cfg: ExperimentConfig) -> float | None:
    raw = cfg.estimator["h"].strip().lower()
    if raw == "auto":
        return None
    try:
        h = float(raw)
    except ValueError as exc:
        raise ConfigError("estimator key h must be 'auto' or a number") from exc
    if h <= 0:
        raise ConfigError("estimator key h must be positive")
    return h
