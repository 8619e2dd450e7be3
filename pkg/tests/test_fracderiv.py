import math

import numpy as np
import pytest
from scipy.integrate import quad

from fbmdrift.errors import DomainError, ResolutionError
from fbmdrift.fbm import FbmPath, FineGrid, generate_fbm, generate_fbm_ensemble
from fbmdrift.fracderiv import (
    MIN_CELLS,
    dyadic_pairs,
    lambda_beta,
    theorem1_statistic,
    z_magnitudes,
    z_scaling_slope,
    z_value,
)

# scipy quad of the defining integral for f(u) = u^2 on [0, 1], alpha = 0.4
U_SQUARED_Z = 0.6440345702777303


def linear(n_cells, horizon=1.0):
    return np.linspace(0.0, horizon, n_cells + 1)


def z_by_quadrature(f, t1, t2, alpha):
    """Independent oracle: adaptive quadrature of the definition."""
    integral, _ = quad(
        lambda u: (f(t1) - f(u)) / (u - t1) ** (2 - alpha), t1, t2, epsabs=1e-12, epsrel=1e-12, limit=200
    )
    boundary = (f(t1) - f(t2)) / (t2 - t1) ** (1 - alpha)
    return abs(boundary + (1 - alpha) * integral) / math.gamma(alpha)


class TestZValue:
    def test_constant_path(self):
        assert z_value(np.full(33, 2.5), 0.0, 1.0, 0.4, step=1 / 32).magnitude == 0.0

    @pytest.mark.parametrize("alpha", [0.3, 0.4, 0.45])
    @pytest.mark.parametrize("cells", [4, 16, 256, 4096])
    def test_linear_path_closed_form(self, alpha, cells):
        z = z_value(linear(cells), 0.0, 1.0, alpha, step=1 / cells).magnitude
        assert z == pytest.approx(1 / math.gamma(1 + alpha), abs=1e-6)

    def test_linear_closed_form_value(self):
        # mpmath: 1 / Gamma(1.4)
        z = z_value(linear(64), 0.0, 1.0, 0.4, step=1 / 64).magnitude
        assert z == pytest.approx(1.12706049798602766, rel=1e-12)

    def test_piecewise_linear_exact_against_quadrature(self):
        rng = np.random.default_rng(4)
        values = rng.standard_normal(9)
        step = 0.125

        def interp(u):
            return np.interp(u, np.arange(9) * step, values)

        # the integrand has kinks at the nodes; split there for quad
        alpha = 0.35
        pieces = sum(
            quad(lambda u: (interp(0.25) - interp(u)) / (u - 0.25) ** (2 - alpha), lo, lo + step, epsabs=1e-13)[0]
            for lo in np.arange(0.25, 1.0, step)
        )
        boundary = (interp(0.25) - interp(1.0)) / 0.75 ** (1 - alpha)
        oracle = abs(boundary + (1 - alpha) * pieces) / math.gamma(alpha)
        got = z_value(values, 0.25, 1.0, alpha, step=step).magnitude
        assert got == pytest.approx(oracle, rel=1e-9)

    def test_u_squared_converges_to_quadrature_oracle(self):
        assert z_by_quadrature(lambda u: u * u, 0.0, 1.0, 0.4) == pytest.approx(U_SQUARED_Z, rel=1e-12)
        errs = []
        for cells in (64, 256, 1024, 4096):
            u = linear(cells)
            errs.append(abs(z_value(u * u, 0.0, 1.0, 0.4, step=1 / cells).magnitude - U_SQUARED_Z))
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-5

    def test_translation_invariant(self):
        path = generate_fbm(0.7, FineGrid(1 / 64, 256), 1)
        a = z_value(path, 1.0, 2.5, 0.4).magnitude
        b = z_value(path.values + 3.0, 1.0, 2.5, 0.4, step=1 / 64).magnitude
        assert a == pytest.approx(b, rel=1e-12)

    def test_errors(self):
        u = linear(16)
        with pytest.raises(DomainError):
            z_value(u, 0.5, 0.5, 0.4, step=1 / 16)
        with pytest.raises(ResolutionError):
            z_value(u, 0.0, 2 / 16, 0.4, step=1 / 16)
        with pytest.raises(ResolutionError):
            z_value(u, 0.01, 1.0, 0.4, step=1 / 16)
        with pytest.raises(DomainError):
            z_value(u, 0.0, 1.0, 0.6, step=1 / 16)

    def test_vectorised_matches_scalar(self):
        path = generate_fbm(0.75, FineGrid(1 / 32, 128), 8)
        starts = np.arange(0, 100, 3)
        vec = z_magnitudes(path.values, 1 / 32, starts, 16, 0.4)
        for s, v in zip(starts, vec):
            assert v == pytest.approx(z_value(path, s / 32, (s + 16) / 32, 0.4).magnitude, rel=1e-12)

    def test_refinement_rate_on_fbm(self):
        """Halving the step changes |Z| by O(step^(H + alpha - 1)) on fBm paths."""
        H, alpha, K = 0.7, 0.4, 11
        ens = generate_fbm_ensemble(H, FineGrid(2.0**-K, 2**K), 1, 100)
        diffs = []
        for k in range(5, K):
            coarse = [z_value(p[:: 2 ** (K - k)], 0, 1, alpha, step=2.0**-k).magnitude for p in ens]
            fine = [z_value(p[:: 2 ** (K - k - 1)], 0, 1, alpha, step=2.0 ** (-k - 1)).magnitude for p in ens]
            diffs.append(np.mean(np.abs(np.subtract(coarse, fine))))
        scaled = np.array(diffs) / 2.0 ** (-np.arange(5, K) * (H + alpha - 1.0 - 0.05))
        assert scaled.max() < 1.5 * scaled[0]

    def test_self_similarity_of_z(self):
        """mean |Z(0,2)| = 2^(H+alpha-1) mean |Z(0,1)| at equal cell counts."""
        H, alpha, cells, n = 0.7, 0.4, 128, 10_000
        one = generate_fbm_ensemble(H, FineGrid(1 / cells, cells), 10, n)
        two = generate_fbm_ensemble(H, FineGrid(2 / cells, cells), 11, n)
        origin = np.array([0])
        z1 = np.array([z_magnitudes(p, 1 / cells, origin, cells, alpha)[0] for p in one])
        z2 = np.array([z_magnitudes(p, 2 / cells, origin, cells, alpha)[0] for p in two])
        scaled = 2.0 ** (H + alpha - 1) * z1
        se = math.sqrt(z2.var(ddof=1) / n + scaled.var(ddof=1) / n)
        assert abs(z2.mean() - scaled.mean()) < 4 * se


class TestDyadicPairs:
    def test_lattice_and_lengths(self):
        levels = dyadic_pairs(0, 32, 16)
        assert [m for m, _ in levels] == [4, 8, 16]
        m, starts = levels[0]
        assert np.array_equal(starts, np.arange(0, 29, 2))

    def test_subrange_family_is_subset(self):
        big = {(m, int(s)) for m, st in dyadic_pairs(0, 64, 64) for s in st}
        small = {(m, int(s)) for m, st in dyadic_pairs(10, 41, 64) for s in st}
        assert small <= big

    def test_cap_thins(self):
        levels = dyadic_pairs(0, 4096, 4096, cap=500)
        assert sum(s.size for _, s in levels) <= 500 + len(levels)


class TestLambdaBeta:
    def test_constant_path_is_one(self):
        assert lambda_beta(np.ones(65), 0.0, 1.0, 0.6, 0.4, step=1 / 64, hurst=0.7) == 1.0

    def test_linear_path_against_brute_force(self):
        cells, alpha, beta = 16, 0.4, 0.6
        f = linear(cells)
        brute = 1.0
        for i in range(cells + 1):
            for j in range(i + MIN_CELLS, cells + 1):
                t1, t2 = i / cells, j / cells
                z = z_by_quadrature(lambda u: u, t1, t2, alpha)
                brute = max(brute, z / (t2 - t1) ** (beta + alpha - 1))
        got = lambda_beta(f, 0.0, 1.0, beta, alpha, step=1 / cells)
        assert got == pytest.approx(brute, rel=1e-9)
        assert got == pytest.approx(1 / math.gamma(1.4), rel=1e-12)

    def test_monotone_in_interval(self):
        path = generate_fbm(0.75, FineGrid(1 / 32, 256), 21)
        inner = lambda_beta(path, 2.0, 3.0, 0.6, 0.4)
        outer = lambda_beta(path, 1.5, 4.0, 0.6, 0.4)
        whole = lambda_beta(path, 0.0, 8.0, 0.6, 0.4)
        assert 1.0 <= inner <= outer <= whole

    def test_constant_shift_invariant(self):
        path = generate_fbm(0.75, FineGrid(1 / 32, 128), 3)
        a = lambda_beta(path, 0.0, 4.0, 0.6, 0.4)
        b = lambda_beta(path.values - 7.0, 0.0, 4.0, 0.6, 0.4, step=1 / 32, hurst=0.75)
        assert a == pytest.approx(b, rel=1e-12)

    def test_beta_range(self):
        path = generate_fbm(0.7, FineGrid(1 / 32, 64), 3)
        with pytest.raises(DomainError):
            lambda_beta(path, 0.0, 1.0, 0.75, 0.4)
        with pytest.raises(DomainError):
            lambda_beta(path, 0.0, 1.0, 0.5, 0.4)


class TestTheorem1Statistic:
    def test_constant_path(self):
        path = FbmPath(grid=FineGrid(1 / 16, 64), values=np.zeros(65), hurst=0.7, seed=0)
        stat = theorem1_statistic([path], 0.35, 0.6)
        assert stat.value == 0.0
        assert stat.pair_count > 0

    def test_empty_ensemble(self):
        with pytest.raises(DomainError):
            theorem1_statistic([], 0.35, 0.6)

    def test_gamma_and_horizon_checks(self):
        path = generate_fbm(0.7, FineGrid(1 / 16, 64), 0)
        with pytest.raises(DomainError):
            theorem1_statistic([path], 0.35, 0.5)
        short = generate_fbm(0.7, FineGrid(1 / 16, 32), 0)
        with pytest.raises(DomainError):
            theorem1_statistic([short], 0.35, 0.6)

    def test_monotone_in_family(self):
        paths = [generate_fbm(0.7, FineGrid(1 / 32, 256), 5, (i,)) for i in range(4)]
        few = theorem1_statistic(paths[:2], 0.35, 0.6)
        all_ = theorem1_statistic(paths, 0.35, 0.6)
        thinned = theorem1_statistic(paths, 0.35, 0.6, cap=200)
        assert few.value <= all_.value
        assert thinned.value <= all_.value
        assert thinned.pair_count < all_.pair_count

    def test_stable_under_horizon_doubling(self):
        H, alpha, gamma, step = 0.7, 0.35, 0.6, 2.0**-6
        meds8, meds16 = [], []
        for seed in range(3):
            p8 = [generate_fbm(H, FineGrid(step, int(8 / step)), seed, (i,)) for i in range(100)]
            p16 = [generate_fbm(H, FineGrid(step, int(16 / step)), 100 + seed, (i,)) for i in range(100)]
            meds8.append(theorem1_statistic(p8, alpha, gamma).value)
            meds16.append(theorem1_statistic(p16, alpha, gamma).value)
        ratio = np.median(meds16) / np.median(meds8)
        assert np.isfinite(ratio) and ratio < 1.5

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_scaling_regression_slope(self, seed):
        path = generate_fbm(0.7, FineGrid(2.0**-10, 4 * 2**10), seed)
        assert abs(z_scaling_slope(path, 0.35)) < 0.15
