import math

import numpy as np
import pytest
from scipy.special import ndtr
from scipy.stats import kstest

from carbonrisk.errors import ConvergenceError, DomainError
from carbonrisk.numerics import (
    QuadratureSpec,
    bivariate_normal_cdf,
    empirical_quantile,
    integrate,
    matrix_exponential,
    normal_cdf,
    normal_quantile,
    rng_stream,
    spectral_report,
)


def quadrature_phi2(x, y, rho, tol=1e-12):
    """Independent oracle: iterated 2-d integral of the bivariate density."""
    s = math.sqrt(1.0 - rho * rho)

    def f(u):
        return math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) * ndtr((y - rho * u) / s)

    return integrate(f, -8.5, x, QuadratureSpec(abs_tol=tol, max_subdivisions=100_000))


class TestNormal:
    def test_symmetry(self):
        assert normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
        assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_cdf_at_one(self):
        # 0.841345 from adaptive quadrature of the standard normal density
        dens = lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        target = 0.5 + integrate(dens, 0.0, 1.0)
        assert normal_cdf(1.0) == pytest.approx(target, abs=1e-12)
        assert normal_cdf(1.0) == pytest.approx(0.841345, abs=1e-6)

    def test_roundtrip(self):
        for p in [1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 1 - 1e-9]:
            assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12

    def test_monotone(self):
        x = np.linspace(-9, 9, 400)
        assert np.all(np.diff(normal_cdf(x)) >= 0)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.1, np.nan])
    def test_quantile_domain(self, p):
        with pytest.raises(DomainError):
            normal_quantile(p)


class TestBivariate:
    def test_independence_symmetric(self):
        assert bivariate_normal_cdf(0.0, 0.0, 0.0) == pytest.approx(0.25, abs=1e-14)

    def test_marginalisation(self):
        for x in [-2.0, 0.3, 1.7]:
            for rho in [-0.8, 0.0, 0.8]:
                assert bivariate_normal_cdf(x, np.inf, rho) == pytest.approx(
                    normal_cdf(x), abs=1e-14
                )
        assert bivariate_normal_cdf(-np.inf, 1.0, 0.5) == 0.0

    def test_known_value(self):
        # 1/4 + arcsin(rho) / (2 pi), exact at the origin
        for rho in [0.5, -0.5, 0.95, -0.95, 0.999]:
            assert bivariate_normal_cdf(0.0, 0.0, rho) == pytest.approx(
                0.25 + math.asin(rho) / (2 * math.pi), abs=1e-13
            )

    def test_against_quadrature_grid(self):
        # coarse version of the acceptance grid
        for x in [-3.0, 0.0, 2.0]:
            for y in [-1.0, 0.5, 3.0]:
                for rho in [-0.95, -0.3, 0.0, 0.6, 0.95]:
                    assert bivariate_normal_cdf(x, y, rho) == pytest.approx(
                        quadrature_phi2(x, y, rho), abs=1e-9
                    )

    def test_extreme_correlation(self):
        for rho in [0.999, -0.999, 0.99999]:
            for x, y in [(-2.0, -1.999), (1.0, 1.0001), (0.5, -0.5)]:
                assert bivariate_normal_cdf(x, y, rho) == pytest.approx(
                    quadrature_phi2(x, y, rho), abs=1e-9
                )

    def test_degenerate_branches(self):
        assert bivariate_normal_cdf(1.0, 2.0, 1.0) == pytest.approx(
            normal_cdf(1.0), abs=1e-14
        )
        assert bivariate_normal_cdf(1.0, 2.0, -1.0) == pytest.approx(
            max(normal_cdf(1.0) + normal_cdf(2.0) - 1.0, 0.0), abs=1e-14
        )

    def test_monotone_in_arguments(self):
        xs = np.linspace(-3, 3, 13)
        for rho in [-0.9, 0.2, 0.95]:
            v = bivariate_normal_cdf(xs, 0.7, rho)
            assert np.all(np.diff(v) >= -1e-14)
            v = bivariate_normal_cdf(-0.4, xs, rho)
            assert np.all(np.diff(v) >= -1e-14)

    def test_domain(self):
        with pytest.raises(DomainError):
            bivariate_normal_cdf(0.0, 0.0, 1.5)
        with pytest.raises(DomainError):
            bivariate_normal_cdf(0.0, 0.0, np.nan)

    def test_tilted_expectation_identity(self):
        # E[e^{s X} 1_{X<=x, Y<=y}] = e^{s^2/2} Phi2(x-s, y-rho*s; rho),
        # checked against Monte Carlo within 3 standard errors.
        rng = rng_stream(2024, 7)
        n = 400_000
        for rho in [-0.6, 0.0, 0.7]:
            z1 = rng.standard_normal(n)
            z2 = rho * z1 + math.sqrt(1 - rho * rho) * rng.standard_normal(n)
            for s in [0.5, 1.2]:
                for x, y in [(0.5, 0.0), (-0.5, 1.0)]:
                    sample = np.exp(s * z1) * ((z1 <= x) & (z2 <= y))
                    mc = sample.mean()
                    se = sample.std(ddof=1) / math.sqrt(n)
                    closed = math.exp(0.5 * s * s) * bivariate_normal_cdf(
                        x - s, y - rho * s, rho
                    )
                    assert abs(closed - mc) <= 3.0 * se


class TestMatrixExponential:
    def test_identity_case(self):
        np.testing.assert_allclose(matrix_exponential(np.zeros((2, 2))), np.eye(2))

    def test_diagonal_case(self):
        m = np.diag([math.log(2.0), math.log(3.0)])
        np.testing.assert_allclose(matrix_exponential(m), np.diag([2.0, 3.0]), rtol=1e-14)

    def test_nilpotent_case(self):
        np.testing.assert_allclose(
            matrix_exponential([[0.0, 1.0], [0.0, 0.0]]), [[1.0, 1.0], [0.0, 1.0]]
        )

    def test_semigroup(self):
        rng = rng_stream(11, 0)
        m = rng.standard_normal((5, 5))
        full = matrix_exponential(m)
        half = matrix_exponential(m / 2.0)
        assert np.linalg.norm(half @ half - full) <= 1e-10 * np.linalg.norm(full)

    def test_domain(self):
        with pytest.raises(DomainError):
            matrix_exponential([[np.inf, 0.0], [0.0, 0.0]])
        with pytest.raises(DomainError):
            matrix_exponential(np.zeros((2, 3)))


class TestSpectralReport:
    def test_hurwitz_flag(self):
        rep = spectral_report(np.array([[1.0, 0.2], [0.0, 0.5]]))
        assert rep.is_hurwitz
        assert rep.lambda_gamma == pytest.approx(0.5)
        assert rep.c_gamma >= 1.0

    def test_non_hurwitz(self):
        rep = spectral_report(np.array([[0.0, 0.0], [0.0, 1.0]]))
        assert not rep.is_hurwitz

    def test_decay_bound_holds(self):
        gamma = np.array([[0.8, 0.3], [-0.1, 1.2]])
        rep = spectral_report(gamma)
        for t in np.linspace(0.0, 20.0, 41):
            norm = np.linalg.norm(matrix_exponential(-gamma * t), 2)
            assert norm <= rep.c_gamma * math.exp(-rep.lambda_gamma * t) + 1e-12


class TestIntegrate:
    def test_constant(self):
        assert integrate(lambda t: 1.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_empty_interval(self):
        assert integrate(lambda t: 5.0, 2.0, 2.0) == 0.0

    def test_polynomial(self):
        assert integrate(lambda s: s * s, 0.0, 1.0) == pytest.approx(1 / 3, abs=1e-10)

    def test_exponential_with_closed_tail(self):
        # finite piece up to the split plus the exact exponential tail equals
        # the full improper integral of e^{-0.05 s}
        rho = -0.05
        split = 30.0
        finite = integrate(lambda s: math.exp(rho * s), 0.0, split)
        tail = -math.exp(rho * split) / rho
        assert finite + tail == pytest.approx(20.0, abs=1e-9)

    def test_matrix_valued(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = integrate(lambda t: a * t, 0.0, 2.0)
        np.testing.assert_allclose(out, 2.0 * a, atol=1e-9)

    def test_budget_exhaustion(self):
        spec = QuadratureSpec(abs_tol=1e-14, max_subdivisions=8)
        with pytest.raises(ConvergenceError) as exc:
            integrate(lambda s: math.exp(-s * s) * math.sin(40 * s) ** 2, 0.0, 6.0, spec)
        assert exc.value.estimate is not None

    def test_bad_bounds(self):
        with pytest.raises(DomainError):
            integrate(lambda t: 1.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            integrate(lambda t: 1.0, 0.0, np.inf)


class TestEmpiricalQuantile:
    def test_order_statistic(self):
        assert empirical_quantile(list(range(1, 101)), 0.99) == 99.0

    def test_singleton(self):
        assert empirical_quantile([5.0], 0.5) == 5.0

    def test_float_guard(self):
        assert empirical_quantile([3.0, 1.0, 2.0], 1 / 3) == 1.0

    def test_permutation_invariant_and_bounded(self):
        rng = rng_stream(3, 3)
        x = rng.standard_normal(257)
        for level in [0.01, 0.37, 0.5, 0.95, 0.999]:
            q = empirical_quantile(x, level)
            assert q == empirical_quantile(x[::-1], level)
            assert q == empirical_quantile(rng.permutation(x), level)
            assert x.min() <= q <= x.max()

    def test_domain(self):
        with pytest.raises(DomainError):
            empirical_quantile([], 0.5)
        with pytest.raises(DomainError):
            empirical_quantile([1.0], 1.0)


class TestRngStreams:
    def test_reproducible(self):
        a = rng_stream(123, 17).standard_normal(1000)
        b = rng_stream(123, 17).standard_normal(1000)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_uncorrelated(self):
        n = 100_000
        a = rng_stream(99, 0).standard_normal(n)
        b = rng_stream(99, 1).standard_normal(n)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) <= 0.01

    def test_gaussian_ks(self):
        draws = rng_stream(7, 42).standard_normal(10_000)
        stat = kstest(draws, "norm").statistic
        # 1% critical value of the KS statistic, 1.63 / sqrt(n)
        assert stat <= 1.63 / math.sqrt(10_000)
