"""Experiment configuration files.

The format is TOML.  Recognised keys (``*`` = required)::

    theta*       drift parameter (number)
    coeff*       "builtin:<name>", "<a expr>; <b expr>", or a table with
                 either ``builtin`` or both ``a`` and ``b`` (``coeff.a = "..."``)
    hurst*       number or list of numbers in (1/2, 1)
    n*           positive integer or list of them
    replicates   default 20
    refinement   default 8
    seed         default 0
    x0           default 0.0
    estimator    "weighted" | "simple" | "both" (default "both")
    driver       "exact" | "unit-interval" | "none" (default "exact")

Keys may also sit under an ``[experiment]`` section.  Unknown keys are errors.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

from fbmdrift.coefficients import builtin_model, model_from_expressions, parse_coefficient_spec
from fbmdrift.errors import ConfigError, FbmDriftError
from fbmdrift.experiment import ESTIMATORS, ExperimentConfig
from fbmdrift.sde import DRIVERS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["REQUIRED_KEYS", "DEFAULTS", "parse_config", "config_from_mapping", "resolved_map"]

REQUIRED_KEYS = ("theta", "coeff", "hurst", "n")
DEFAULTS: dict[str, Any] = {
    "replicates": 20,
    "refinement": 8,
    "seed": 0,
    "x0": 0.0,
    "estimator": "both",
    "driver": "exact",
}
_KNOWN = set(REQUIRED_KEYS) | set(DEFAULTS)


def _number(raw: Mapping, key: str, kind=float):
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}", key)
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}", key)
        return int(value)
    return float(value)


def _number_list(raw: Mapping, key: str, kind=float) -> list:
    value = raw[key]
    items = value if isinstance(value, list) else [value]
    if not items:
        raise ConfigError(f"{key} must not be empty", key)
    return [_number({key: v}, key, kind) for v in items]


def _coefficients(value):
    try:
        if isinstance(value, str):
            return parse_coefficient_spec(value), _coeff_canonical(value)
        if isinstance(value, Mapping):
            extra = set(value) - {"a", "b", "builtin"}
            if extra:
                raise ConfigError(f"unknown key coeff.{sorted(extra)[0]}", f"coeff.{sorted(extra)[0]}")
            if "builtin" in value:
                if set(value) != {"builtin"}:
                    raise ConfigError("coeff.builtin cannot be combined with coeff.a/coeff.b", "coeff")
                return builtin_model(str(value["builtin"])), {"builtin": str(value["builtin"])}
            if set(value) != {"a", "b"}:
                missing = "coeff.a" if "a" not in value else "coeff.b"
                raise ConfigError(f"missing {missing}", missing)
            a, b = str(value["a"]), str(value["b"])
            return model_from_expressions(a, b), {"a": a, "b": b}
    except ConfigError as exc:
        raise ConfigError(str(exc), exc.key or "coeff") from None
    raise ConfigError(f"coeff must be a string or a table, got {value!r}", "coeff")


def _coeff_canonical(spec: str) -> dict[str, str]:
    spec = spec.strip()
    if spec.startswith("builtin:"):
        return {"builtin": spec.split(":", 1)[1].strip()}
    a, b = spec.split(";")
    return {"a": a.strip(), "b": b.strip()}


def config_from_mapping(raw: Mapping[str, Any]) -> tuple[ExperimentConfig, dict[str, Any]]:
    """Validate a key-value mapping and return ``(config, resolved map)``."""
    raw = dict(raw)
    if "experiment" in raw and isinstance(raw["experiment"], Mapping):
        section = raw.pop("experiment")
        clash = set(section) & set(raw)
        if clash:
            key = sorted(clash)[0]
            raise ConfigError(f"{key} given both at top level and in [experiment]", key)
        raw.update(section)
    unknown = sorted(set(raw) - _KNOWN)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", unknown[0])
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}", missing[0])
    merged = {**DEFAULTS, **raw}

    theta = _number(merged, "theta")
    model, coeff = _coefficients(merged["coeff"])
    hurst = _number_list(merged, "hurst")
    for h in hurst:
        if not 0.5 < h < 1.0:
            raise ConfigError(f"hurst values must lie in (1/2, 1), got {h!r}", "hurst")
    ns = _number_list(merged, "n", int)
    if min(ns) < 1:
        raise ConfigError("n values must be positive integers", "n")
    replicates = _number(merged, "replicates", int)
    if replicates < 1:
        raise ConfigError("replicates must be at least 1", "replicates")
    refinement = _number(merged, "refinement", int)
    if refinement < 1:
        raise ConfigError("refinement must be at least 1", "refinement")
    seed = _number(merged, "seed", int)
    if seed < 0:
        raise ConfigError("seed must be nonnegative", "seed")
    x0 = _number(merged, "x0")
    estimator = merged["estimator"]
    if estimator not in (*ESTIMATORS, "both"):
        raise ConfigError(f"estimator must be weighted, simple or both, got {estimator!r}", "estimator")
    driver = merged["driver"]
    if driver not in DRIVERS:
        raise ConfigError(f"driver must be one of {', '.join(DRIVERS)}, got {driver!r}", "driver")

    estimators = ESTIMATORS if estimator == "both" else (estimator,)
    try:
        config = ExperimentConfig(
            theta=theta, model=model, hurst_list=tuple(hurst), n_list=tuple(ns),
            replicates=replicates, refinement=refinement, base_seed=seed,
            estimators=estimators, x0=x0, driver=driver,
        )
    except FbmDriftError as exc:
        raise ConfigError(str(exc)) from None
    resolved = {
        "theta": theta, "coeff": coeff, "hurst": hurst, "n": ns, "replicates": replicates,
        "refinement": refinement, "seed": seed, "x0": x0, "estimator": estimator,
        "driver": driver,
    }
    return config, resolved


def parse_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> tuple[ExperimentConfig, dict[str, Any]]:
    """Read a TOML config file (optional), apply flag ``overrides``, validate."""
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        if isinstance(raw.get("experiment"), Mapping):
            raw = {**{k: v for k, v in raw.items() if k != "experiment"}, **raw["experiment"]}
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return config_from_mapping(raw)


def resolved_map(resolved: Mapping[str, Any]) -> dict[str, Any]:
    """Derived quantities recorded next to a resolved config (``lambda = 1/2 - H``)."""
    derived: dict[str, Any] = {}
    if resolved.get("estimator") in ("weighted", "both"):
        derived["lambda"] = [0.5 - h for h in resolved["hurst"]]
    return derived
