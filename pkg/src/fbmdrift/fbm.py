"""Exact simulation of fractional Brownian motion on uniform grids.

Paths are produced by circulant embedding of the stationary increment
autocovariance (Davies-Harte), with a dense Cholesky factorisation as the
fallback when the embedding is not nonnegative definite.  Every path is a pure
function of ``(H, grid, seed, stream)``: the random numbers come from a Philox
counter-based generator keyed by the seed and the stream tuple, so replicate
``r`` of an ensemble never depends on which worker produced replicate ``r - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from fbmdrift.errors import DomainError, NumericalError

__all__ = [
    "FineGrid",
    "FbmPath",
    "check_hurst",
    "fbm_covariance",
    "increment_autocovariance",
    "embedding_spectrum",
    "generate_fbm",
    "generate_fbm_ensemble",
    "rng_stream",
]

#: Relative size of negative embedding eigenvalues that is clipped to zero.
CLIP_TOLERANCE = 1e-8
#: Largest increment count for which the dense Cholesky fallback is attempted.
CHOLESKY_MAX_COUNT = 4096


def check_hurst(H: float, *, estimation: bool = False) -> float:
    """Validate a Hurst parameter and return it as a float.

    Path generation accepts ``0 < H < 1``; estimation workflows need
    ``1/2 < H < 1``.
    """
    H = float(H)
    lo = 0.5 if estimation else 0.0
    if not (lo < H < 1.0):
        raise DomainError(f"Hurst parameter must lie in ({lo:g}, 1), got {H!r}")
    return H


@dataclass(frozen=True)
class FineGrid:
    """Uniform simulation grid ``j * step`` for ``j = 0..count``."""

    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and np.isfinite(self.step)):
            raise DomainError(f"grid step must be positive, got {self.step!r}")
        if int(self.count) != self.count or self.count < 1:
            raise DomainError(f"grid count must be a positive integer, got {self.count!r}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "step", float(self.step))

    @classmethod
    def from_horizon(cls, horizon: float, step: float) -> "FineGrid":
        count = horizon / step
        if abs(count - round(count)) > 1e-9 * max(1.0, count):
            raise DomainError(f"horizon {horizon!r} is not a multiple of step {step!r}")
        return cls(step=step, count=int(round(count)))

    @property
    def horizon(self) -> float:
        return self.step * self.count

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.count + 1) * self.step


@dataclass(frozen=True)
class FbmPath:
    """One sampled fBm trajectory; ``values[j]`` is ``B^H`` at ``grid.times[j]``.

    ``increments`` keeps the sampled increments as drawn (``values`` is their
    running sum), so an SDE driven by them can reproduce ``values`` bitwise.
    """

    grid: FineGrid
    values: np.ndarray = field(repr=False)
    hurst: float
    seed: int
    stream: tuple[int, ...] = ()
    increments: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.count + 1,):
            raise DomainError(
                f"expected {self.grid.count + 1} values, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        inc = np.diff(values) if self.increments is None else np.asarray(self.increments, dtype=float)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)


def fbm_covariance(s, t, H: float):
    """Covariance ``E[B_s B_t] = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2``.

    Works elementwise on arrays; negative times raise :class:`DomainError`.
    """
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise DomainError("fBm covariance is defined for nonnegative times only")
    two_h = 2.0 * float(H)
    out = 0.5 * (s_arr**two_h + t_arr**two_h - np.abs(t_arr - s_arr) ** two_h)
    return float(out) if out.ndim == 0 else out


def increment_autocovariance(count: int, step: float, H: float) -> np.ndarray:
    """Autocovariance ``r(k)``, ``k = 0..count``, of fBm increments over ``step``."""
    k = np.arange(count + 1, dtype=float)
    two_h = 2.0 * H
    return 0.5 * step**two_h * (
        np.abs(k + 1) ** two_h - 2.0 * k**two_h + np.abs(k - 1) ** two_h
    )


@lru_cache(maxsize=64)
def _spectrum(count: int, step: float, H: float) -> np.ndarray:
    r = increment_autocovariance(count, step, H)
    row = np.concatenate([r, r[-2:0:-1]])
    eig = np.fft.fft(row).real
    eig.setflags(write=False)
    return eig


def embedding_spectrum(count: int, step: float, H: float) -> np.ndarray:
    """Eigenvalues of the size-``2 * count`` circulant extension of ``r``.

    Negative entries are returned as computed; the caller decides whether to
    clip them or to fall back to Cholesky.
    """
    if int(count) != count or count < 1:
        raise DomainError(f"count must be a positive integer, got {count!r}")
    return _spectrum(int(count), float(step), float(H)).copy()


@lru_cache(maxsize=16)
def _cholesky_factor(count: int, step: float, H: float) -> np.ndarray:
    from scipy.linalg import toeplitz

    cov = toeplitz(increment_autocovariance(count, step, H)[:count])
    for jitter in (0.0, 1e-14, 1e-12, 1e-10):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(count))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky of the increment covariance failed (count={count}, step={step}, "
        f"H={H}) even with jitter 1e-10"
    )


def _sampler(count: int, step: float, H: float):
    """Return ``(method, operator)`` used to turn normals into increments."""
    eig = _spectrum(count, step, H)
    top = float(eig.max())
    if eig.min() >= -CLIP_TOLERANCE * top:
        return "circulant", np.sqrt(np.clip(eig, 0.0, None) / eig.size)
    if count > CHOLESKY_MAX_COUNT:
        raise NumericalError(
            f"circulant embedding has eigenvalue {eig.min():.3e} below tolerance and "
            f"count={count} exceeds the Cholesky fallback limit {CHOLESKY_MAX_COUNT}"
        )
    return "cholesky", _cholesky_factor(count, step, H)


def rng_stream(seed: int, stream: Sequence[int] = ()) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *stream)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _increments(count, step, H, rng) -> np.ndarray:
    method, op = _sampler(count, step, H)
    if method == "circulant":
        m = op.size
        z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return np.fft.fft(op * z)[:count].real
    return op @ rng.standard_normal(count)


def generate_fbm(
    H: float, grid: FineGrid, seed: int, stream: Sequence[int] = ()
) -> FbmPath:
    """Sample fBm on ``grid``; deterministic in ``(H, grid, seed, stream)``."""
    H = check_hurst(H)
    rng = rng_stream(seed, stream)
    inc = _increments(grid.count, grid.step, H, rng)
    values = np.empty(grid.count + 1)
    values[0] = 0.0
    np.cumsum(inc, out=values[1:])
    return FbmPath(
        grid=grid, values=values, hurst=H, seed=int(seed), stream=tuple(stream), increments=inc
    )


def generate_fbm_ensemble(
    H: float, grid: FineGrid, seed: int, n_paths: int, stream: Sequence[int] = ()
) -> np.ndarray:
    """Array of shape ``(n_paths, count + 1)``.

    Row ``i`` is bit-identical to ``generate_fbm(H, grid, seed, (*stream, i)).values``.
    """
    H = check_hurst(H)
    out = np.zeros((n_paths, grid.count + 1))
    for i in range(n_paths):
        rng = rng_stream(seed, (*stream, i))
        np.cumsum(_increments(grid.count, grid.step, H, rng), out=out[i, 1:])
    return out
