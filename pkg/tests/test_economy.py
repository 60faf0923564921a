import math

import numpy as np
import pytest

from carbonrisk.economy import (
    Elasticities,
    EquilibriumMaps,
    ProductivityParams,
    ProductivityState,
    equilibrium_maps,
    equilibrium_oracle,
    equilibrium_residual,
    ou_conditional_law,
    output_and_consumption,
    simulate_paths,
    state_transition,
    stationary_covariance,
    unconditional_state_law,
)
from carbonrisk.errors import ValidationError
from carbonrisk.numerics import rng_stream
from carbonrisk.scenario import EmissionsCostRate


def params_4d(varsigma=1.0, seed=5):
    rng = rng_stream(seed, 0)
    base = rng.uniform(0.3, 0.9, size=4)
    gamma = np.diag(base) + 0.05 * rng.standard_normal((4, 4))
    sigma = 0.02 * (np.eye(4) + 0.2 * rng.uniform(0.0, 1.0, size=(4, 4)))
    mu = rng.uniform(0.005, 0.02, size=4)
    return ProductivityParams(mu=mu, gamma=gamma, sigma=sigma, varsigma=varsigma)


def random_elasticities(rng, n):
    psi = rng.uniform(0.3, 0.7, size=n)
    raw = rng.uniform(0.2, 1.0, size=(n, n))
    lam = raw / raw.sum(axis=1, keepdims=True) * (1.0 - psi)[:, None]
    return Elasticities(psi=psi, lam=lam, phi=1.0)


def random_cost_rate(rng, n, scale=0.3):
    return EmissionsCostRate(
        dtau=rng.uniform(0.0, scale, size=n),
        dzeta=rng.uniform(0.0, scale, size=(n, n)),
        dkappa=rng.uniform(0.0, scale, size=n),
    )


class TestOUConditionalLaw:
    def test_zero_horizon_point_mass(self):
        p = params_4d()
        state = ProductivityState(0.0, np.ones(4), 0.5 * np.ones(4))
        law = ou_conditional_law(p, state, 0.0)
        np.testing.assert_allclose(law.mean_z, state.z)
        np.testing.assert_allclose(law.mean_a, state.a_circ)
        assert np.all(law.cov_zz == 0.0) and np.all(law.cov_aa == 0.0)

    def test_scalar_exponential_mean(self):
        p = ProductivityParams(mu=[0.0], gamma=[[1.0]], sigma=[[1.0]])
        state = ProductivityState(0.0, [2.0], [0.0])
        law = ou_conditional_law(p, state, math.log(2.0))
        assert law.mean_z[0] == pytest.approx(1.0, rel=1e-12)

    def test_scalar_stationary_variance(self):
        # int_0^inf e^{-2u} du = 1/2
        p = ProductivityParams(mu=[0.0], gamma=[[1.0]], sigma=[[1.0]])
        state = ProductivityState(0.0, [0.0], [0.0])
        law = ou_conditional_law(p, state, 20.0)
        assert law.cov_zz[0, 0] == pytest.approx(0.5, abs=1e-9)
        np.testing.assert_allclose(
            stationary_covariance(p.gamma, p.sigma), [[0.5]], atol=1e-12
        )

    def test_covariances_symmetric_psd(self):
        p = params_4d()
        state = ProductivityState(0.0, np.zeros(4), np.zeros(4))
        for h in [0.0, 0.5, 1.0, 5.0, 25.0]:
            law = ou_conditional_law(p, state, h)
            for c in (law.cov_zz, law.cov_aa):
                np.testing.assert_allclose(c, c.T, atol=1e-14)
                assert np.min(np.linalg.eigvalsh(c)) >= -1e-12
            _, joint = law.joint()
            assert np.min(np.linalg.eigvalsh(joint)) >= -1e-12

    def test_upsilon_limit_and_bound(self):
        p = params_4d()
        g_inv = np.linalg.inv(p.gamma)
        rep = p.spectral
        assert np.linalg.norm(p.upsilon(200.0) - g_inv) <= 1e-8
        for h in [0.1, 0.5, 1.0, 3.0, 10.0, 50.0]:
            bound = rep.c_gamma * min(1.0 / rep.lambda_gamma, h)
            assert np.linalg.norm(p.upsilon(h), 2) <= bound + 1e-12

    def test_markov_consistency(self):
        # composing two transitions equals the one-shot law, means and covs
        p = params_4d()
        h1, h2 = 0.7, 1.6
        t1 = state_transition(p, h1)
        t2 = state_transition(p, h2)
        t12 = state_transition(p, h1 + h2)
        n = 4
        # transition matrix of (z, a): [[e^{-G h}, 0], [vs Ups_h, I]]
        def tmat(tr):
            top = np.hstack([tr.e_gamma, np.zeros((n, n))])
            bot = np.hstack([tr.varsigma * tr.upsilon, np.eye(n)])
            return np.vstack([top, bot])

        m1, m2, m12 = tmat(t1), tmat(t2), tmat(t12)
        np.testing.assert_allclose(m2 @ m1, m12, atol=1e-10)
        v1 = t1.chol @ t1.chol.T
        v2 = t2.chol @ t2.chol.T
        v12 = t12.chol @ t12.chol.T
        np.testing.assert_allclose(m2 @ v1 @ m2.T + v2, v12, atol=1e-10)

    def test_unconditional_law_stationary_z(self):
        p = params_4d()
        law = unconditional_state_law(p, 12.0)
        np.testing.assert_allclose(law.cov_zz, p.z0_cov, atol=1e-8)
        np.testing.assert_allclose(law.mean_a, p.mu * 12.0)

    def test_non_hurwitz_rejected(self):
        with pytest.raises(ValidationError):
            ProductivityParams(mu=[0.0], gamma=[[-0.2]], sigma=[[1.0]])


class TestSimulatePaths:
    def test_deterministic_drift_limit(self):
        p = ProductivityParams(
            mu=[0.02, 0.01], gamma=np.eye(2), sigma=0.03 * np.eye(2), varsigma=1e-12
        )
        out = simulate_paths(p, [0.0, 1.0, 3.0], 3, seed=1, substeps=8)
        for k, t in enumerate([0.0, 1.0, 3.0]):
            np.testing.assert_allclose(out.a_circ[:, k, :], np.outer([1, 1, 1], p.mu) * t, atol=1e-9)

    def test_reproducible_across_blocking(self):
        p = params_4d()
        a = simulate_paths(p, [0.0, 1.0], 7, seed=42, substeps=4, block=2)
        b = simulate_paths(p, [0.0, 1.0], 7, seed=42, substeps=4, block=7)
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.a_circ, b.a_circ)

    def test_moments_match_conditional_law(self):
        # reduced version of the acceptance run: 2e4 paths, I = 4, h = 1
        p = params_4d()
        n_paths, h = 20_000, 1.0
        z0 = np.array([0.01, -0.02, 0.03, 0.0])
        out = simulate_paths(p, [0.0, h], n_paths, seed=9, substeps=64, z0=z0)
        law = ou_conditional_law(p, ProductivityState(0.0, z0, np.zeros(4)), h)
        zT = out.z[:, -1, :]
        aT = out.a_circ[:, -1, :]
        for sims, mean, cov in [(zT, law.mean_z, law.cov_zz), (aT, law.mean_a, law.cov_aa)]:
            se = np.sqrt(np.diag(cov) / n_paths)
            assert np.all(np.abs(sims.mean(axis=0) - mean) <= 3.0 * se + 1e-12)
            sample_cov = np.cov(sims.T)
            for i in range(4):
                for j in range(4):
                    se_cov = math.sqrt(
                        (cov[i, i] * cov[j, j] + cov[i, j] ** 2) / n_paths
                    )
                    assert abs(sample_cov[i, j] - cov[i, j]) <= 4.0 * se_cov + 1e-14

    def test_housing_integral_moments(self):
        p = params_4d()
        nu = 0.4
        n_paths, h = 20_000, 1.0
        out = simulate_paths(
            p, [0.0, h], n_paths, seed=10, substeps=64, housing_decay=nu
        )
        hh = out.h_housing[:, -1, :]
        var = (1.0 - math.exp(-2.0 * nu * h)) / (2.0 * nu)
        se = math.sqrt(2.0) * var / math.sqrt(n_paths)
        assert np.all(np.abs(hh.mean(axis=0)) <= 3.0 * math.sqrt(var / n_paths))
        assert np.all(np.abs(hh.var(axis=0) - var) <= 4.0 * se)


class TestEquilibrium:
    def test_zero_cost_rate_recovers_elasticities(self):
        rng = rng_stream(21, 0)
        el = random_elasticities(rng, 4)
        maps = equilibrium_maps(el, EmissionsCostRate.zero(4))
        np.testing.assert_allclose(maps.psi_adj, el.psi, rtol=1e-14)
        np.testing.assert_allclose(maps.lam_adj, el.lam, rtol=1e-14)

    def test_scalar_geometric_series(self):
        el = Elasticities(psi=[0.7], lam=[[0.3]], phi=1.0)
        maps = equilibrium_maps(el, EmissionsCostRate.zero(1))
        assert maps.output_ratio[0] == pytest.approx(1.0 / 0.7, rel=1e-12)

    def test_scalar_output_shifter(self):
        # collapses to lam * ln(lam) for one sector at zero cost
        el = Elasticities(psi=[0.7], lam=[[0.3]], phi=1.0)
        maps = equilibrium_maps(el, EmissionsCostRate.zero(1))
        assert maps.output_shifter[0] == pytest.approx(0.3 * math.log(0.3), rel=1e-12)
        assert maps.output_shifter[0] == pytest.approx(-0.36119, abs=1e-5)

    def test_tau_halves_lambda(self):
        rng = rng_stream(22, 0)
        el = random_elasticities(rng, 3)
        d = EmissionsCostRate(
            dtau=0.5 * np.ones(3), dzeta=np.zeros((3, 3)), dkappa=np.zeros(3)
        )
        maps = equilibrium_maps(el, d)
        np.testing.assert_allclose(maps.lam_adj, el.lam / 2.0, rtol=1e-14)

    def test_output_consumption_identities(self):
        rng = rng_stream(23, 0)
        for n in [1, 3, 5]:
            el = random_elasticities(rng, n)
            d = random_cost_rate(rng, n)
            maps = equilibrium_maps(el, d)
            a = rng.standard_normal(n) * 0.3
            y, c = output_and_consumption(maps, el, a)
            assert np.all(y > 0.0) and np.all(c > 0.0)
            np.testing.assert_allclose(y / c, maps.output_ratio, rtol=1e-12)
            np.testing.assert_allclose(
                np.log(y) - np.log(c), np.log(maps.output_ratio), atol=1e-12
            )

    def test_scalar_output_value(self):
        el = Elasticities(psi=[0.7], lam=[[0.3]], phi=1.0)
        maps = EquilibriumMaps(
            psi_adj=el.psi,
            lam_adj=el.lam,
            output_ratio=np.array([1.0 / 0.7]),
            consumption_shifter=np.zeros(1),
            output_shifter=np.zeros(1),
        )
        y, _ = output_and_consumption(maps, el, np.array([0.7]))
        assert y[0] == pytest.approx(math.e, rel=1e-12)


class TestEquilibriumOracle:
    def test_closed_form_satisfies_system(self):
        rng = rng_stream(31, 0)
        for _ in range(10):
            n = int(rng.integers(1, 6))
            el = random_elasticities(rng, n)
            d = random_cost_rate(rng, n)
            maps = equilibrium_maps(el, d)
            a = 0.3 * rng.standard_normal(n)
            y, c = output_and_consumption(maps, el, a)
            assert equilibrium_residual(el, d, y, c, a) <= 1e-10

    def test_oracle_matches_closed_form(self):
        rng = rng_stream(32, 0)
        for _ in range(10):
            n = int(rng.integers(1, 6))
            el = random_elasticities(rng, n)
            d = random_cost_rate(rng, n)
            maps = equilibrium_maps(el, d)
            a = 0.3 * rng.standard_normal(n)
            y, c = output_and_consumption(maps, el, a)
            y_fp, c_fp = equilibrium_oracle(el, a, d)
            np.testing.assert_allclose(y_fp, y, rtol=1e-8)
            np.testing.assert_allclose(c_fp, c, rtol=1e-8)

    def test_deterministic_no_noise_case(self):
        rng = rng_stream(33, 0)
        el = random_elasticities(rng, 3)
        d = EmissionsCostRate.zero(3)
        maps = equilibrium_maps(el, d)
        _, c = equilibrium_oracle(el, np.zeros(3), d)
        expected = np.exp(
            np.linalg.solve(np.eye(3) - el.lam, maps.consumption_shifter)
        )
        np.testing.assert_allclose(c, expected, rtol=1e-9)


class TestElasticitiesValidation:
    def test_constant_returns_enforced(self):
        with pytest.raises(ValidationError):
            Elasticities(psi=[0.5], lam=[[0.3]], phi=1.0)

    def test_positivity(self):
        with pytest.raises(ValidationError):
            Elasticities(psi=[1.0], lam=[[0.0]], phi=1.0)
