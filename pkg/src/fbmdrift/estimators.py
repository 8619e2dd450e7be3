"""Drift estimators from dyadic discrete observations.

Both estimators are ratios of sums over ``k = 1..2^(2n) - 1``; the last
increment (ending at ``t = 2^n``) is not used.  The weighted estimator applies
``t_k^lam (2^n - t_k)^lam`` with ``lam = 1/2 - H``; the simple one is its
``lam = 0`` special case.  Sums are exactly rounded (:func:`math.fsum`), so the
result does not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from fbmdrift.coefficients import CoefficientModel
from fbmdrift.errors import DegenerateEstimateError, DomainError
from fbmdrift.fbm import check_hurst
from fbmdrift.sde import ObservationSeries

__all__ = [
    "EstimateResult",
    "SMALL_DIFFUSION",
    "beta_weight_sum",
    "dyadic_weights",
    "estimate_theta1",
    "estimate_theta2",
    "estimate",
]

#: A warning is attached when ``min |b(X_{t_k})|`` drops below this.
SMALL_DIFFUSION = 0.01

Kind = Literal["weighted", "simple"]


@dataclass(frozen=True)
class EstimateResult:
    kind: Kind
    value: float
    n: int
    numerator: float
    denominator: float
    hurst_used: float | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if (self.kind == "weighted") != (self.hurst_used is not None):
            raise ValueError("hurst_used is required for weighted estimates and only for them")


def dyadic_weights(n: int, lam: float) -> np.ndarray:
    """``t_k^lam (2^n - t_k)^lam`` for ``k = 1..2^(2n) - 1``, evaluated in log space."""
    k = np.arange(1, 4**n, dtype=float)
    # t_k = k 2^-n and 2^n - t_k = (4^n - k) 2^-n are exact in binary
    log_t = np.log(k) - n * math.log(2.0)
    log_rest = np.log(4.0**n - k) - n * math.log(2.0)
    return np.exp(lam * (log_t + log_rest))


def beta_weight_sum(n: int, lam: float) -> float:
    """Riemann sum ``sum_k (k/N)^lam (1 - k/N)^lam / N`` over ``k = 1..N-1``, ``N = 4^n``.

    Converges to ``B(1 + lam, 1 + lam)`` as ``n`` grows.
    """
    if lam <= -1.0:
        raise DomainError(f"weights diverge for lambda <= -1, got {lam!r}")
    N = 4**n
    k = np.arange(1, N, dtype=float)
    terms = np.exp(lam * (np.log(k / N) + np.log1p(-k / N))) / N
    return math.fsum(terms.tolist())


def _ratio(obs: ObservationSeries, model: CoefficientModel, weights):
    n = obs.grid.n
    x = obs.values
    prev = x[:-2]  # X_{t_{k-1}}, k = 1..4^n - 1
    dx = x[1:-1] - prev
    b = np.asarray(model.b(prev), dtype=float)
    zero = np.flatnonzero(b == 0.0)
    if zero.size:
        k = int(zero[0]) + 1
        raise DegenerateEstimateError(f"diffusion coefficient vanishes at X_(t_{k - 1}) (k={k})")
    a = np.asarray(model.a(prev), dtype=float)
    w = weights / b if weights is not None else 1.0 / b
    num = math.fsum((w * dx).tolist())
    den = math.fsum((w * a).tolist()) * 2.0**-n
    if den == 0.0 or not math.isfinite(den):
        raise DegenerateEstimateError(f"estimator denominator is {den!r} at n={n}")
    notes = ()
    small = float(np.min(np.abs(b)))
    if small < SMALL_DIFFUSION:
        notes = (f"min |b(X)| = {small:.3g} < {SMALL_DIFFUSION}; estimate may be unreliable",)
    return num, den, notes


def estimate_theta1(
    obs: ObservationSeries, model: CoefficientModel, H: float, *, lam: float | None = None
) -> EstimateResult:
    """Beta-weighted estimator with ``lam = 1/2 - H``.

    ``lam`` may be overridden (testing the ``lam = 0`` collapse onto the
    simple estimator).
    """
    H = check_hurst(H, estimation=True)
    lam = 0.5 - H if lam is None else float(lam)
    weights = dyadic_weights(obs.grid.n, lam)
    num, den, notes = _ratio(obs, model, weights)
    return EstimateResult("weighted", num / den, obs.grid.n, num, den, H, notes)


def estimate_theta2(obs: ObservationSeries, model: CoefficientModel) -> EstimateResult:
    """Unweighted discretised-likelihood estimator; does not need ``H``."""
    num, den, notes = _ratio(obs, model, None)
    return EstimateResult("simple", num / den, obs.grid.n, num, den, None, notes)


def estimate(
    kind: Kind, obs: ObservationSeries, model: CoefficientModel, H: float | None = None
) -> EstimateResult:
    if kind == "weighted":
        if H is None:
            raise DomainError("the weighted estimator needs the Hurst parameter")
        return estimate_theta1(obs, model, H)
    if kind == "simple":
        return estimate_theta2(obs, model)
    raise DomainError(f"unknown estimator {kind!r}")
