"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` (the lines are printed even
without ``-s``).  Tolerances are fixed by the project requirements; the seed
(42) was fixed before any run was looked at.
"""

import math

import numpy as np
import pytest

from fbmdrift.coefficients import builtin_model, model_from_expressions
from fbmdrift.estimators import beta_weight_sum, estimate_theta1, estimate_theta2
from fbmdrift.experiment import pathology_run, rate_fit, worker_count
from fbmdrift.fbm import FineGrid, generate_fbm, generate_fbm_ensemble
from fbmdrift.fracderiv import lambda_beta, theorem1_statistic, z_scaling_slope, z_value
from fbmdrift.sde import (
    ObservationGrid,
    ObservationSeries,
    downsample,
    driving_fbm,
    holder_diagnostic,
    increment_bound_constant,
    observation_fine_grid,
    simulate_sde,
)

from conftest import ACCEPTANCE_SEED
from reference_values import (
    HURST,
    N_VALUES,
    NEAR_DEGENERATE_ERRORS,
    TAME_ERRORS,
)

BAND = (0.4, 2.5)
ESTIMATORS = ("weighted", "simple")


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
        assert ok, detail

    return report


def band_summary(report, published):
    ratios = [report.mean_error(*k) / ref for k, ref in published.items()]
    return f"ratio to published {min(ratios):.2f}..{max(ratios):.2f}"


def worst(misses, count=4):
    ordered = sorted(misses, key=lambda m: -abs(math.log(m[3])))
    return ", ".join(f"H={k[0]} n={k[1]} {k[2]} {got} vs {ref}" for k, got, ref, _ in ordered[:count])


def band_misses(report, published):
    misses = []
    for key, ref in published.items():
        got = report.mean_error(*key)
        ratio = got / ref
        if not BAND[0] <= ratio <= BAND[1] or report.cells[key].failures:
            misses.append((key, round(got, 4), ref, round(ratio, 2)))
    return misses


def test_criterion_1_table1(table1_report, verdict):
    misses = band_misses(table1_report, TAME_ERRORS)
    verdict(1, "tame coefficients, every cell within [0.4x, 2.5x]", not misses,
            f"{32 - len(misses)}/32 cells in band, {band_summary(table1_report, TAME_ERRORS)}; "
            f"worst: {worst(misses) or 'none'}")


def test_criterion_2_table2(table1_report, table2_report, verdict):
    misses = band_misses(table2_report, NEAR_DEGENERATE_ERRORS)
    not_worse = [k for k in TAME_ERRORS if not table2_report.mean_error(*k) > table1_report.mean_error(*k)]
    ok = not misses and len(not_worse) <= 2
    verdict(2, "near-degenerate coefficients, band plus exceeds tame table", ok,
            f"{32 - len(misses)}/32 cells in band; {len(not_worse)} cells not above tame "
            f"(<= 2 allowed), {band_summary(table2_report, NEAR_DEGENERATE_ERRORS)}; worst: {worst(misses) or 'none'}")


def test_criterion_3_rate(table1_report, verdict):
    slopes = {(H, e): rate_fit(table1_report, H, e).slope for H in HURST for e in ESTIMATORS}
    in_range = all(-1.5 <= s <= -0.6 for s in slopes.values())
    spread = {e: max(slopes[(H, e)] for H in HURST) - min(slopes[(H, e)] for H in HURST) for e in ESTIMATORS}
    ok = in_range and all(v < 0.4 for v in spread.values())
    shown = ", ".join(f"H={H} {e}: {s:.3f}" for (H, e), s in slopes.items())
    verdict(3, "log2 rate slope in [-1.5, -0.6], spread across H < 0.4", ok,
            f"slopes {shown}; spread {{{', '.join(f'{e}: {v:.3f}' for e, v in spread.items())}}}")


def test_criterion_4_pathology(verdict):
    common = dict(theta=2.0, H=0.7, n=6, replicates=10, base_seed=ACCEPTANCE_SEED, workers=worker_count())
    drift = pathology_run(builtin_model("drift-sign-change"), **common)
    diffusion = pathology_run(builtin_model("diffusion-sign-change"), **common)
    ok = (
        drift.iqr_over_theta > 0.25
        and diffusion.iqr_over_theta < 0.15
        and 1.7 <= diffusion.median <= 2.3
    )
    verdict(4, "sign changes: drift IQR/theta > 0.25; diffusion IQR/theta < 0.15, median in [1.7, 2.3]", ok,
            f"drift IQR/theta {drift.iqr_over_theta:.3f}; diffusion IQR/theta "
            f"{diffusion.iqr_over_theta:.3f}, median {diffusion.median:.3f}")


def test_criterion_5_exact_recovery(verdict):
    problems = []
    rng = np.random.default_rng(ACCEPTANCE_SEED)
    for _ in range(200):
        theta, c, b = rng.uniform(-20, 20), rng.uniform(0.1, 5), rng.uniform(0.1, 5)
        n, H, x0 = int(rng.integers(1, 6)), rng.uniform(0.51, 0.99), rng.uniform(-5, 5)
        grid = ObservationGrid(n)
        obs = ObservationSeries(grid, x0 + theta * c * grid.points)
        model = model_from_expressions(repr(c), repr(b))
        for res in (estimate_theta1(obs, model, H), estimate_theta2(obs, model)):
            if abs(res.value - theta) > 1e-12 * abs(theta):
                problems.append(("recovery", theta, res.kind, res.value))
    tame = builtin_model("tame")
    for seed in range(10):
        obs = downsample(simulate_sde(2.0, tame, 0.0, 0.7, 3, 8, seed), ObservationGrid(3))
        a, s = estimate_theta1(obs, tame, 0.7, lam=0.0), estimate_theta2(obs, tame)
        if (a.value, a.numerator, a.denominator) != (s.value, s.numerator, s.denominator):
            problems.append(("collapse", seed))
    unit_noise = builtin_model("unit")
    noise_only = model_from_expressions("2*sin(x)+3", "1")
    for seed in range(5):
        path = simulate_sde(0.0, noise_only, 0.0, 0.7, 3, 8, seed)
        noise = driving_fbm(0.7, path.fine_grid, seed)
        if not np.array_equal(path.values, noise.values):
            problems.append(("driver identity", seed))
        if not np.array_equal(downsample(path, ObservationGrid(3)).values, noise.values[::8]):
            problems.append(("downsample identity", seed))
        one = simulate_sde(2.0, unit_noise, 0.0, 0.7, 2, 1, seed)
        if not np.array_equal(downsample(one, ObservationGrid(2)).values, one.values):
            problems.append(("refinement-1 identity", seed))
    verdict(5, "exact recovery, lambda=0 collapse, downsample/driver identities", not problems,
            f"{len(problems)} problems {problems[:5]}")


def test_criterion_6_fbm_statistics(verdict):
    details, ok = [], True
    grid = FineGrid(step=0.125, count=64)
    for H in (0.55, 0.7, 0.9):
        ens = generate_fbm_ensemble(H, grid, ACCEPTANCE_SEED, 10_000)
        rng = np.random.default_rng(ACCEPTANCE_SEED)
        worst = 0.0
        for _ in range(5):
            i, j = sorted(rng.choice(grid.count + 1, size=2, replace=False))
            d = ens[:, j] - ens[:, i]
            target = ((j - i) * grid.step) ** (2 * H)
            z = abs(d.var(ddof=1) - target) / (target * math.sqrt(2 / (d.size - 1)))
            worst = max(worst, z)
        ok &= worst < 4
        details.append(f"H={H}: worst |z| {worst:.2f}")
    ens = generate_fbm_ensemble(0.5, FineGrid(step=1.0, count=2), ACCEPTANCE_SEED, 10_000)
    inc = np.diff(ens, axis=1)
    corr = float(np.corrcoef(inc[:, 0], inc[:, 1])[0, 1])
    ok &= abs(corr) <= 0.03
    details.append(f"H=0.5 increment correlation {corr:+.4f}")
    verdict(6, "increment variance within 4 SE at 5 lags; H=0.5 correlation within 0.03", ok, "; ".join(details))


def test_criterion_7_frac_calculus(verdict):
    BETA = {0.0: 1.0, -0.1: 1.22609748910628732, -0.2: 1.51696423279292304, -0.4: 2.41534420800247196}
    worst_linear = 0.0
    for alpha in (0.3, 0.4, 0.45):
        for cells in (4, 16, 64, 256, 1024, 4096):
            z = z_value(np.linspace(0, 1, cells + 1), 0.0, 1.0, alpha, step=1 / cells).magnitude
            worst_linear = max(worst_linear, abs(z - 1 / math.gamma(1 + alpha)))
    slopes = [z_scaling_slope(generate_fbm(0.7, FineGrid(2.0**-10, 4 * 2**10), ACCEPTANCE_SEED, (i,)), 0.35)
              for i in range(3)]
    gamma_err = max(abs(beta_weight_sum(10, lam) - ref) for lam, ref in BETA.items())
    ok = worst_linear <= 1e-6 and all(abs(s) <= 0.15 for s in slopes) and gamma_err <= 2e-3
    verdict(7, "linear-path Z to 1e-6, scaling slope within 0.15 of 0, gamma_10 within 2e-3", ok,
            f"linear max error {worst_linear:.2e}; slopes {[round(s, 3) for s in slopes]}; "
            f"gamma_10 max error {gamma_err:.2e}")


def test_criterion_8_properties(table1_report, table2_report, verdict):
    problems, notes = [], []
    # finiteness and stability of the ratio statistics
    H, alpha, gamma, step = 0.7, 0.35, 0.6, 2.0**-6
    stats = {}
    for horizon in (8, 16):
        paths = [generate_fbm(H, FineGrid(step, int(horizon / step)), ACCEPTANCE_SEED + horizon, (i,)) for i in range(100)]
        stats[horizon] = theorem1_statistic(paths, alpha, gamma).value
        lam = lambda_beta(paths[0], 0.0, float(horizon), 0.6, alpha)
        if not (math.isfinite(stats[horizon]) and math.isfinite(lam)):
            problems.append(("non-finite ratio", horizon))
    change = abs(stats[16] - stats[8]) / stats[8]
    notes.append(f"frac-derivative sup ratio [0,8] {stats[8]:.3f} vs [0,16] {stats[16]:.3f}")
    if not change < 0.5:
        problems.append(("sup ratio unstable", round(change, 3)))

    tame = builtin_model("tame")
    medians = []
    for n in (4, 5):
        z = [holder_diagnostic(simulate_sde(2.0, tame, 0.0, H, n, 8, ACCEPTANCE_SEED, stream=(s,)), 0.6, 0.6).zeta_hat
             for s in range(50)]
        if not all(map(math.isfinite, z)):
            problems.append(("non-finite zeta", n))
        medians.append(float(np.median(z)))
    notes.append(f"zeta median n=4 {medians[0]:.3f}, n=5 {medians[1]:.3f}")
    if not abs(medians[1] - medians[0]) < 0.5 * medians[0]:
        problems.append(("zeta unstable", medians))

    fitted = []
    for n in (3, 4, 5):
        vals = []
        for s in range(10):
            grid = observation_fine_grid(n, 8)
            noise = driving_fbm(H, grid, ACCEPTANCE_SEED, (s,))
            path = simulate_sde(2.0, tame, 0.0, H, n, 8, ACCEPTANCE_SEED, stream=(s,))
            vals.append(increment_bound_constant(path, noise, alpha, 0.6))
        if not all(map(math.isfinite, vals)):
            problems.append(("non-finite increment constant", n))
        fitted.append(float(np.median(vals)))
    notes.append(f"increment constant n=3..5 {[round(v, 2) for v in fitted]}")
    if not max(fitted) < 2 * min(fitted):
        problems.append(("increment constant unstable", fitted))

    # monotone accuracy: n = 6 beats n = 3 in every cell of both tables
    for name, report in (("tame", table1_report), ("near-degenerate", table2_report)):
        for Hh in HURST:
            for e in ESTIMATORS:
                if not report.mean_error(Hh, N_VALUES[-1], e) < report.mean_error(Hh, N_VALUES[0], e):
                    problems.append(("not monotone", name, Hh, e))
        if any(not math.isfinite(c.mean_rel_error) for c in report.cells.values()):
            problems.append(("non-finite error", name))
    verdict(8, "finite diagnostics, stable ratio statistics, monotone accuracy in n", not problems,
            f"{'; '.join(notes)}; problems {problems}")
