"""Right-sided fractional derivative of sampled paths and sup-ratio statistics.

For ``t1 < t2`` the quantity evaluated here is the magnitude of

    Z(t1, t2) = (1/Gamma(alpha)) * ( (f(t1) - f(t2)) / (t2 - t1)^(1 - alpha)
                 + (1 - alpha) * int_{t1}^{t2} (f(t1) - f(u)) / (u - t1)^(2 - alpha) du )

The unimodular prefactor ``exp(-i pi alpha)`` is dropped; only ``|Z|`` is used
anywhere downstream.  The singular integral is evaluated exactly for the
piecewise-linear interpolant of the samples: on a grid of spacing ``h`` it
reduces to ``h^(alpha - 1) * sum_j w_j (f(t1) - f(t1 + j h))`` with node
weights ``w_j`` obtained by integrating hat functions against the kernel in
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fbmdrift.errors import DomainError, ResolutionError

__all__ = [
    "FracDerivSample",
    "RatioStatistic",
    "z_value",
    "z_magnitudes",
    "dyadic_pairs",
    "lambda_beta",
    "theorem1_statistic",
    "z_scaling_slope",
]

#: Minimum number of sample intervals between ``t1`` and ``t2``.
MIN_CELLS = 4
#: Upper bound on the number of pairs scanned per path.
MAX_PAIRS = 1_000_000


@dataclass(frozen=True)
class FracDerivSample:
    t1: float
    t2: float
    magnitude: float


@dataclass(frozen=True)
class RatioStatistic:
    """Largest normalised ``|Z|`` over a pair family and the family size."""

    value: float
    gamma: float
    alpha: float
    pair_count: int


def _check_alpha(alpha: float, hurst: float | None = None) -> float:
    alpha = float(alpha)
    lo = 0.0 if hurst is None else 1.0 - hurst
    if not (lo < alpha < 0.5):
        raise DomainError(f"alpha must lie in ({lo:g}, 1/2), got {alpha!r}")
    return alpha


def _samples(path, step: float | None) -> tuple[np.ndarray, float, float | None]:
    """Unpack ``(values, step, hurst)`` from a path object or a raw array."""
    if hasattr(path, "values"):
        grid = getattr(path, "grid", None) or getattr(path, "fine_grid")
        return np.asarray(path.values, dtype=float), grid.step, getattr(path, "hurst", None)
    if step is None:
        raise DomainError("step is required when a raw sample array is given")
    return np.asarray(path, dtype=float), float(step), None


def _index(t: float, step: float, size: int) -> int:
    x = t / step
    i = int(round(x))
    if abs(x - i) > 1e-9 * max(1.0, abs(x)):
        raise ResolutionError(f"time {t!r} is not a sample point of the grid (step {step!r})")
    if not 0 <= i < size:
        raise DomainError(f"time {t!r} lies outside the sampled range")
    return i


def _p(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """``int_a^b s^(alpha - 1) ds`` for ``0 < a < b``."""
    return a**alpha * np.expm1(alpha * np.log1p((b - a) / a)) / alpha


def _q(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    """``int_a^b s^(alpha - 2) ds`` for ``0 < a < b``."""
    return a ** (alpha - 1.0) * np.expm1((alpha - 1.0) * np.log1p((b - a) / a)) / (alpha - 1.0)


@lru_cache(maxsize=128)
def _node_weights(m: int, alpha: float) -> np.ndarray:
    # hat function at node j integrated against s^(alpha-2) on the unit grid
    w = np.zeros(m)
    j = np.arange(1, m + 1, dtype=float)
    left = np.empty(m)
    left[0] = 1.0 / alpha
    if m > 1:
        a, b = j[1:] - 1.0, j[1:]
        left[1:] = _p(a, b, alpha) - a * _q(a, b, alpha)
    w += left
    if m > 1:
        a, b = j[:-1], j[:-1] + 1.0
        w[:-1] += b * _q(a, b, alpha) - _p(a, b, alpha)
    w.setflags(write=False)
    return w


def z_magnitudes(
    values: np.ndarray, step: float, starts: np.ndarray, m: int, alpha: float
) -> np.ndarray:
    """``|Z(t_i, t_{i+m})|`` for every start index ``i`` in ``starts``."""
    values = np.asarray(values, dtype=float)
    starts = np.asarray(starts, dtype=np.intp)
    if starts.size == 0:
        return np.empty(0)
    windows = sliding_window_view(values, m + 1)[starts]
    g = windows[:, :1] - windows[:, 1:]
    weights = _node_weights(m, float(alpha))
    integral = step ** (alpha - 1.0) * (g @ weights)
    boundary = g[:, -1] / (m * step) ** (1.0 - alpha)
    return np.abs(boundary + (1.0 - alpha) * integral) / math.gamma(alpha)


def z_value(path, t1: float, t2: float, alpha: float, *, step: float | None = None) -> FracDerivSample:
    """Fractional derivative magnitude ``|Z(t1, t2)|`` of a sampled path.

    ``path`` is an :class:`~fbmdrift.fbm.FbmPath`, an SDE path, or a raw array
    sampled from time 0 with spacing ``step``.  ``t1`` and ``t2`` must be sample
    points at least :data:`MIN_CELLS` intervals apart.
    """
    if not t1 < t2:
        raise DomainError(f"need t1 < t2, got t1={t1!r}, t2={t2!r}")
    values, h, _ = _samples(path, step)
    alpha = _check_alpha(alpha)
    i, j = _index(t1, h, values.size), _index(t2, h, values.size)
    if j - i < MIN_CELLS:
        raise ResolutionError(
            f"[{t1}, {t2}] spans {j - i} sample intervals; at least {MIN_CELLS} required"
        )
    mag = z_magnitudes(values, h, np.array([i]), j - i, alpha)[0]
    return FracDerivSample(t1=float(t1), t2=float(t2), magnitude=float(mag))


def dyadic_pairs(
    lo: int, hi: int, max_cells: int, *, min_cells: int = MIN_CELLS, cap: int = MAX_PAIRS
) -> list[tuple[int, np.ndarray]]:
    """Dyadic pair family inside index range ``[lo, hi]``.

    Returns ``(m, starts)`` levels: lengths ``m = 2^q`` cells with
    ``min_cells <= m <= max_cells`` and start indices on the absolute lattice of
    spacing ``max(m // 2, 1)``.  Because the lattice is anchored at index 0, the
    family for a larger range always contains the family for a sub-range.  If the
    family exceeds ``cap`` pairs, starts on the finest levels are thinned with a
    uniform stride.
    """
    levels = []
    m = 1
    while m < min_cells:
        m *= 2
    while m <= min(max_cells, hi - lo):
        stride = max(m // 2, 1)
        first = -(-lo // stride) * stride
        starts = np.arange(first, hi - m + 1, stride)
        if starts.size:
            levels.append((m, starts))
        m *= 2
    total = sum(s.size for _, s in levels)
    if total > cap:
        budget = cap // max(len(levels), 1)
        levels = [
            (m, s if s.size <= budget else s[:: -(-s.size // budget)]) for m, s in levels
        ]
    return levels


def lambda_beta(
    path,
    t1: float,
    t2: float,
    beta: float,
    alpha: float,
    *,
    step: float | None = None,
    hurst: float | None = None,
) -> float:
    """``1 v sup |Z(u, v)| / (v - u)^(beta + alpha - 1)`` over dyadic sub-pairs of ``[t1, t2]``."""
    values, h, path_hurst = _samples(path, step)
    hurst = hurst if hurst is not None else path_hurst
    upper = 1.0 if hurst is None else hurst
    if not (0.5 < beta < upper):
        raise DomainError(f"beta must lie in (1/2, {upper:g}), got {beta!r}")
    alpha = _check_alpha(alpha, hurst)
    if not t1 < t2:
        raise DomainError(f"need t1 < t2, got t1={t1!r}, t2={t2!r}")
    lo, hi = _index(t1, h, values.size), _index(t2, h, values.size)
    best = 1.0
    for m, starts in dyadic_pairs(lo, hi, hi - lo):
        z = z_magnitudes(values, h, starts, m, alpha)
        best = max(best, float(z.max()) / (m * h) ** (beta + alpha - 1.0))
    return best


def _theorem1_ratios(values, h, hurst, alpha, gamma, cap=MAX_PAIRS):
    max_cells = int(math.floor(1.0 / h + 1e-9))
    for m, starts in dyadic_pairs(0, values.size - 1, max_cells, cap=cap):
        length = m * h
        scale = length ** (hurst + alpha - 1.0) * (math.sqrt(abs(math.log(length))) + 1.0)
        t2 = (starts + m) * h
        z = z_magnitudes(values, h, starts, m, alpha)
        yield z / (scale * np.log(t2 + 2.0) ** gamma)


def theorem1_statistic(
    paths: Sequence,
    alpha: float,
    gamma: float,
    *,
    hurst: float | None = None,
    cap: int = MAX_PAIRS,
) -> RatioStatistic:
    """Largest ``|Z| / (h(t2 - t1) log(t2 + 2)^gamma)`` over pairs with ``t2 - t1 <= 1``.

    ``h(s) = s^(H + alpha - 1) (|log s|^(1/2) + 1)``.  Paths are reduced in
    index order.
    """
    paths = list(paths)
    if not paths:
        raise DomainError("theorem1_statistic needs at least one path")
    if not gamma > 0.5:
        raise DomainError(f"gamma must exceed 1/2, got {gamma!r}")
    value, count = 0.0, 0
    for path in paths:
        values, h, path_hurst = _samples(path, None)
        H = hurst if hurst is not None else path_hurst
        if H is None:
            raise DomainError("Hurst parameter unknown for path")
        a = _check_alpha(alpha, H)
        if (values.size - 1) * h < 4.0 - 1e-12:
            raise DomainError("each path must cover a horizon of at least 4")
        for ratios in _theorem1_ratios(values, h, H, a, gamma, cap):
            count += ratios.size
            if ratios.size:
                value = max(value, float(ratios.max()))
    return RatioStatistic(value=value, gamma=float(gamma), alpha=float(alpha), pair_count=count)


def z_scaling_slope(
    path, alpha: float, scales: Iterable[float] = (2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6)
) -> float:
    """Log-log slope of the mean ratio ``|Z| / L^(H + alpha - 1)`` against scale ``L``.

    Self-similarity makes the mean ratio scale-free, so the slope is near zero
    for an fBm path.
    """
    values, h, H = _samples(path, None)
    alpha = _check_alpha(alpha, H)
    xs, ys = [], []
    for length in scales:
        m = int(round(length / h))
        if m < MIN_CELLS or abs(m * h - length) > 1e-9 * length:
            raise ResolutionError(f"scale {length!r} is not resolved by step {h!r}")
        starts = np.arange(0, values.size - m, max(m // 2, 1))
        ratio = z_magnitudes(values, h, starts, m, alpha) / length ** (H + alpha - 1.0)
        xs.append(math.log2(length))
        ys.append(math.log2(float(ratio.mean())))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)
