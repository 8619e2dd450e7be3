"""Pathwise Euler simulation of ``dX = theta a(X) dt + b(X) dB^H`` and observation.

For ``H > 1/2`` the stochastic integral is a pathwise Young limit, so the
forward-point Euler recursion on a fine grid is consistent.  The fine grid has
``refinement`` sub-steps per observation interval ``2^-n``; observations sit on
the dyadic design ``t_k = k 2^-n``, ``k = 0..2^(2n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fbmdrift.coefficients import CoefficientModel
from fbmdrift.errors import AlignmentError, DomainError, NumericalError
from fbmdrift.fbm import FbmPath, FineGrid, check_hurst, generate_fbm
from fbmdrift.fracderiv import MIN_CELLS, dyadic_pairs, z_magnitudes

__all__ = [
    "DRIVERS",
    "ObservationGrid",
    "ObservationSeries",
    "SdePath",
    "HolderDiagnostic",
    "observation_fine_grid",
    "driving_fbm",
    "euler_path",
    "simulate_sde",
    "downsample",
    "holder_diagnostic",
    "increment_bound_constant",
]

#: ``exact``: fBm on the simulation time axis.  ``unit-interval``: fBm sampled on
#: ``[0, 1]`` with the same number of points, its increments used unscaled on
#: the ``[0, 2^n]`` axis (a time-compressed driver; see README).  ``none``:
#: zero noise, a testing hook that keeps ``b`` available to the estimators.
DRIVERS = ("exact", "unit-interval", "none")


@dataclass(frozen=True)
class ObservationGrid:
    """Dyadic design ``t_k = k 2^-n`` for ``k = 0..2^(2n)`` on ``[0, 2^n]``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def size(self) -> int:
        """Number of intervals, ``2^(2n)``."""
        return 4**self.n

    @property
    def spacing(self) -> float:
        return 2.0**-self.n

    @property
    def horizon(self) -> float:
        return 2.0**self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size + 1) * self.spacing


@dataclass(frozen=True)
class ObservationSeries:
    grid: ObservationGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.size + 1,):
            raise DomainError(
                f"n={self.grid.n} needs {self.grid.size + 1} observations, got {values.size}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SdePath:
    fine_grid: FineGrid
    values: np.ndarray = field(repr=False)
    theta: float
    x0: float
    hurst: float
    driver_seed: int
    driver_stream: tuple[int, ...] = ()
    driver: str = "exact"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.fine_grid.count + 1,):
            raise DomainError("SDE path length does not match its grid")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> FineGrid:
        return self.fine_grid


@dataclass(frozen=True)
class HolderDiagnostic:
    zeta_hat: float
    max_pair: tuple[float, float]


def observation_fine_grid(n: int, refinement: int) -> FineGrid:
    if int(refinement) != refinement or refinement < 1:
        raise DomainError(f"refinement must be a positive integer, got {refinement!r}")
    return FineGrid(step=2.0**-n / refinement, count=4**n * int(refinement))


def driving_fbm(
    H: float, grid: FineGrid, seed: int, stream: Sequence[int] = (), driver: str = "exact"
) -> FbmPath:
    """Driving noise for :func:`simulate_sde` on ``grid``."""
    if driver == "exact":
        return generate_fbm(H, grid, seed, stream)
    if driver == "unit-interval":
        unit = generate_fbm(H, FineGrid(step=1.0 / grid.count, count=grid.count), seed, stream)
        return FbmPath(
            grid=grid, values=unit.values, hurst=unit.hurst, seed=unit.seed,
            stream=unit.stream, increments=unit.increments,
        )
    if driver == "none":
        return FbmPath(
            grid=grid, values=np.zeros(grid.count + 1), hurst=check_hurst(H), seed=int(seed),
            stream=tuple(stream), increments=np.zeros(grid.count),
        )
    raise DomainError(f"unknown driver {driver!r}; choose from {DRIVERS}")


def euler_path(
    theta: float, model: CoefficientModel, x0: float, increments: np.ndarray, step: float
) -> np.ndarray:
    """Forward Euler ``X_{j+1} = X_j + theta a(X_j) step + b(X_j) dB_j``."""
    a, b = model.a, model.b
    theta, step = float(theta), float(step)
    out = [float(x0)]
    x = out[0]
    append = out.append
    try:
        for db in increments.tolist():
            x = x + theta * a(x) * step + b(x) * db
            append(x)
    except NumericalError as exc:
        raise NumericalError(f"numerical blow-up at step {len(out) - 1}: {exc}") from None
    values = np.array(out)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalError(f"numerical blow-up: non-finite state at step {bad[0]}")
    return values


def simulate_sde(
    theta: float,
    model: CoefficientModel,
    x0: float,
    H: float,
    obs_n: int,
    refinement: int = 8,
    seed: int = 0,
    *,
    stream: Sequence[int] = (),
    driver: str = "exact",
) -> SdePath:
    """Simulate on ``[0, 2^obs_n]`` with ``refinement`` Euler steps per observation interval."""
    H = check_hurst(H, estimation=True)
    grid = observation_fine_grid(obs_n, refinement)
    noise = driving_fbm(H, grid, seed, stream, driver)
    values = euler_path(theta, model, x0, noise.increments, grid.step)
    return SdePath(
        fine_grid=grid, values=values, theta=float(theta), x0=float(x0), hurst=H,
        driver_seed=int(seed), driver_stream=tuple(stream), driver=driver,
    )


def downsample(path: SdePath, grid: ObservationGrid) -> ObservationSeries:
    """Copy the path values at the observation points (no interpolation)."""
    fine = path.fine_grid
    ratio = grid.spacing / fine.step
    r = int(round(ratio))
    if r < 1 or abs(ratio - r) > 1e-12 * ratio or fine.count != grid.size * r:
        raise AlignmentError(
            f"observation grid n={grid.n} is not a subset of the fine grid "
            f"(step={fine.step!r}, count={fine.count})"
        )
    return ObservationSeries(grid=grid, values=path.values[::r].copy())


def holder_diagnostic(path: SdePath, beta: float, gamma: float) -> HolderDiagnostic:
    """Largest ``|X_t2 - X_t1| / ((t2 - t1)^beta log(t2 + 2)^kappa)``, ``kappa = gamma / beta``.

    Scans dyadic pairs with ``t2 - t1 <= 1``.
    """
    if not (0.5 < beta < path.hurst):
        raise DomainError(f"beta must lie in (1/2, {path.hurst:g}), got {beta!r}")
    if not gamma > 0.5:
        raise DomainError(f"gamma must exceed 1/2, got {gamma!r}")
    kappa = gamma / beta
    h, x = path.fine_grid.step, path.values
    max_cells = int(math.floor(1.0 / h + 1e-9))
    best, pair = 0.0, (0.0, h)
    for m, starts in dyadic_pairs(0, x.size - 1, max_cells, min_cells=1):
        t2 = (starts + m) * h
        ratio = np.abs(x[starts + m] - x[starts]) / ((m * h) ** beta * np.log(t2 + 2.0) ** kappa)
        k = int(np.argmax(ratio))
        if ratio[k] > best:
            best, pair = float(ratio[k]), (float(starts[k] * h), float(t2[k]))
    return HolderDiagnostic(zeta_hat=best, max_pair=pair)


def increment_bound_constant(
    path: SdePath, noise: FbmPath, alpha: float, beta: float
) -> float:
    """Smallest ``C`` with ``|dX| <= C (Lam L^beta + Lam^(1/beta) L)`` on dyadic pairs, ``L <= 1``.

    ``Lam`` is the dyadic-scan sup ratio of the driving noise over each pair
    (the quantity computed by :func:`~fbmdrift.fracderiv.lambda_beta`).
    """
    h = path.fine_grid.step
    if noise.grid != path.fine_grid:
        raise AlignmentError("driving noise and SDE path use different grids")
    x, b = path.values, noise.values
    max_cells = int(math.floor(1.0 / h + 1e-9))
    # uncapped: the window indexing below needs the complete lattice
    levels = dyadic_pairs(0, x.size - 1, max_cells, min_cells=1, cap=2**62)
    # sub-pair ratios on the full anchored lattice, one array per length
    ratios = {}
    for m, starts in levels:
        if m >= MIN_CELLS:
            z = z_magnitudes(b, h, starts, m, alpha)
            ratios[m] = z / (m * h) ** (beta + alpha - 1.0)
    best = 0.0
    for m, starts in levels:
        lam = np.ones(starts.size)
        for sub, r in ratios.items():
            if sub > m:
                continue
            width = 2 * (m // sub) - 1
            window_max = sliding_window_view(r, width).max(axis=1)
            lam = np.maximum(lam, window_max[(2 * starts) // sub])
        length = m * h
        dx = np.abs(x[starts + m] - x[starts])
        bound = lam * length**beta + lam ** (1.0 / beta) * length
        best = max(best, float(np.max(dx / bound)))
    return best
