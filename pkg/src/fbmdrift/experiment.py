"""Replicated simulate-then-estimate experiments and empirical rate fits.

Replicate ``r`` of cell ``(H_i, n)`` draws its driving noise from the stream
``(base_seed, i, n, r)``, so a report depends only on the configuration, never
on the number of workers or the order in which replicates finish.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from fbmdrift.coefficients import CoefficientModel
from fbmdrift.errors import DegenerateEstimateError, DomainError, NumericalError
from fbmdrift.estimators import estimate
from fbmdrift.fbm import check_hurst
from fbmdrift.sde import DRIVERS, ObservationGrid, downsample, simulate_sde

__all__ = [
    "ESTIMATORS",
    "ExperimentConfig",
    "CellResult",
    "RateFit",
    "ExperimentReport",
    "PathologyResult",
    "run_experiment",
    "fit_log2_rate",
    "rate_fit",
    "pathology_run",
    "worker_count",
]

ESTIMATORS = ("weighted", "simple")


@dataclass(frozen=True)
class ExperimentConfig:
    theta: float
    model: CoefficientModel
    hurst_list: tuple[float, ...]
    n_list: tuple[int, ...]
    replicates: int = 20
    refinement: int = 8
    base_seed: int = 0
    estimators: tuple[str, ...] = ESTIMATORS
    x0: float = 0.0
    driver: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "hurst_list", tuple(float(h) for h in self.hurst_list))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if self.replicates < 1:
            raise DomainError("replicates must be at least 1")
        if not self.n_list or min(self.n_list) < 1:
            raise DomainError("n_list must be a nonempty list of positive integers")
        if not self.hurst_list:
            raise DomainError("hurst_list must be nonempty")
        for h in self.hurst_list:
            check_hurst(h, estimation=True)
        if not self.estimators or set(self.estimators) - set(ESTIMATORS):
            raise DomainError(f"estimators must be a nonempty subset of {ESTIMATORS}")
        if self.driver not in DRIVERS:
            raise DomainError(f"driver must be one of {DRIVERS}")


@dataclass
class CellResult:
    """Relative errors ``|est - theta| / |theta|`` of one ``(H, n, estimator)`` cell.

    ``per_replicate`` and ``estimates`` hold NaN for failed replicates; the
    summary statistics are over successes only.
    """

    per_replicate: list[float]
    estimates: list[float]
    failures: int
    wall_time_ms: float

    @property
    def mean_rel_error(self) -> float:
        ok = [e for e in self.per_replicate if not math.isnan(e)]
        return float(np.mean(ok)) if ok else math.nan

    @property
    def median_rel_error(self) -> float:
        ok = [e for e in self.per_replicate if not math.isnan(e)]
        return float(np.median(ok)) if ok else math.nan


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: dict[tuple[float, int, str], CellResult] = field(default_factory=dict)
    rate_fits: dict[tuple[float, str], RateFit] = field(default_factory=dict)

    def mean_error(self, H: float, n: int, estimator: str) -> float:
        return self.cells[(float(H), int(n), estimator)].mean_rel_error


def worker_count() -> int:
    """Worker cap from ``FBMDRIFT_THREADS`` (``0`` or unset means one per CPU)."""
    raw = os.environ.get("FBMDRIFT_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"FBMDRIFT_THREADS must be an integer, got {raw!r}") from None
    return value if value > 0 else (os.cpu_count() or 1)


def _replicate(config: ExperimentConfig, h_index: int, n: int, r: int):
    """Estimates and timings for one replicate; failures come back as messages."""
    H = config.hurst_list[h_index]
    try:
        path = simulate_sde(
            config.theta, config.model, config.x0, H, n, config.refinement,
            config.base_seed, stream=(h_index, n, r), driver=config.driver,
        )
    except NumericalError as exc:
        return {est: (None, 0.0, str(exc)) for est in config.estimators}
    obs = downsample(path, ObservationGrid(n))
    out = {}
    for est in config.estimators:
        start = time.perf_counter()
        try:
            value = estimate(est, obs, config.model, H).value
            out[est] = (value, time.perf_counter() - start, None)
        except DegenerateEstimateError as exc:
            out[est] = (None, time.perf_counter() - start, str(exc))
    return out


def _run_task(args):
    return _replicate(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Simulate every ``(H, n, replicate)`` and aggregate relative errors.

    With ``workers > 1`` replicates run in a process pool; the report is
    identical to the sequential one.
    """
    tasks = [
        (config, i, n, r)
        for i in range(len(config.hurst_list))
        for n in config.n_list
        for r in range(config.replicates)
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        results = [_run_task(t) for t in tasks]

    report = ExperimentReport(config=config)
    scale = abs(config.theta) if config.theta != 0 else 1.0
    by_cell: dict[tuple[float, int, str], list] = {}
    for (_, i, n, _r), res in zip(tasks, results):
        for est in config.estimators:
            by_cell.setdefault((config.hurst_list[i], n, est), []).append(res[est])
    for key, rows in by_cell.items():
        values = [v for v, _, _ in rows]
        report.cells[key] = CellResult(
            per_replicate=[math.nan if v is None else abs(v - config.theta) / scale for v in values],
            estimates=[math.nan if v is None else v for v in values],
            failures=sum(v is None for v in values),
            wall_time_ms=1e3 * float(np.mean([t for _, t, _ in rows])),
        )
    if len(config.n_list) >= 3:
        for H in config.hurst_list:
            for est in config.estimators:
                try:
                    report.rate_fits[(H, est)] = rate_fit(report, H, est)
                except NumericalError:
                    pass
    return report


def fit_log2_rate(ns: Sequence[int], errors: Sequence[float]) -> RateFit:
    """Least-squares line through ``(n, log2 error)``."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ns.size < 3:
        raise DomainError(f"rate fit needs at least 3 values of n, got {ns.size}")
    if np.any(~np.isfinite(errors)) or np.any(errors <= 0):
        raise NumericalError("rate fit needs finite positive errors")
    slope, intercept = np.polyfit(ns, np.log2(errors), 1)
    return RateFit(slope=float(slope), intercept=float(intercept))


def rate_fit(report: ExperimentReport, H: float, estimator: str) -> RateFit:
    """Empirical exponent of ``mean_rel_error ~ 2^(slope * n)`` for one ``(H, estimator)``."""
    ns = sorted(n for (h, n, e) in report.cells if h == float(H) and e == estimator)
    return fit_log2_rate(ns, [report.mean_error(H, n, estimator) for n in ns])


@dataclass(frozen=True)
class PathologyResult:
    estimates: tuple[float, ...]
    failures: int
    median: float
    iqr_over_theta: float


def pathology_run(
    model: CoefficientModel,
    theta: float,
    H: float,
    n: int,
    replicates: int = 10,
    *,
    estimator: str = "weighted",
    refinement: int = 8,
    base_seed: int = 0,
    x0: float = 0.0,
    driver: str = "exact",
    workers: int = 1,
) -> PathologyResult:
    """Raw estimates from ``replicates`` independent paths plus their dispersion."""
    config = ExperimentConfig(
        theta=theta, model=model, hurst_list=(H,), n_list=(n,), replicates=replicates,
        refinement=refinement, base_seed=base_seed, estimators=(estimator,), x0=x0,
        driver=driver,
    )
    cell = run_experiment(config, workers=workers).cells[(float(H), int(n), estimator)]
    ok = np.array([v for v in cell.estimates if not math.isnan(v)])
    if ok.size == 0:
        return PathologyResult(tuple(cell.estimates), cell.failures, math.nan, math.nan)
    q1, med, q3 = np.percentile(ok, [25, 50, 75])
    return PathologyResult(
        estimates=tuple(cell.estimates),
        failures=cell.failures,
        median=float(med),
        iqr_over_theta=float((q3 - q1) / abs(theta)),
    )
