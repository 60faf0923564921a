import math

import numpy as np
import pytest
from scipy.optimize import brentq

from carbonrisk.errors import DomainError, ValidationError
from carbonrisk.numerics import integrate, rng_stream
from carbonrisk.scenario import (
    NAMED_SCENARIOS,
    SCENARIO_ORDER,
    CarbonIntensityCurve,
    CarbonPricePath,
    EnergyPriceModel,
    RenovationCostModel,
    carbon_intensity,
    carbon_price,
    emissions_cost_rate,
    energy_price,
    named_carbon_price_path,
    optimal_renovation_time,
    scenario_from_dict,
)


class TestCarbonPrice:
    def test_table_values_at_start(self):
        # published starting prices, exact at t_circ
        expected = {
            "Current Policies": 30.957,
            "NDCs": 33.321,
            "Divergent Net Zero": 32.963,
            "Net Zero 2050": 34.315,
        }
        for name, p0 in expected.items():
            path = named_carbon_price_path(name)
            assert carbon_price(path, 2021.0) == pytest.approx(p0, abs=1e-12)

    def test_plateaus(self):
        path = named_carbon_price_path("NDCs")
        assert carbon_price(path, 0.0) == carbon_price(path, 2021.0)
        assert carbon_price(path, 2030.0) == carbon_price(path, 2100.0)

    def test_continuity_at_knots(self):
        path = named_carbon_price_path("Net Zero 2050")
        for knot in (2021.0, 2030.0):
            below = carbon_price(path, knot - 1e-9)
            above = carbon_price(path, knot + 1e-9)
            assert below == pytest.approx(above, rel=1e-7)

    def test_exponential_value(self):
        path = named_carbon_price_path("Net Zero 2050")
        assert carbon_price(path, 2030.0) == pytest.approx(
            34.315 * math.exp(0.17935 * 9.0), rel=1e-12
        )
        assert carbon_price(path, 2030.0) == pytest.approx(172.4, abs=0.1)

    def test_pointwise_ordering_on_annual_grid(self):
        grid = np.arange(2022.0, 2031.0)
        values = [carbon_price(named_carbon_price_path(n), grid) for n in SCENARIO_ORDER]
        for softer, harder in zip(values, values[1:]):
            assert np.all(softer <= harder)

    def test_knot_form_matches_exponential_at_knots(self):
        p0, eta = NAMED_SCENARIOS["NDCs"]
        ts = np.linspace(2021.0, 2030.0, 19)
        vs = p0 * np.exp(eta * (ts - 2021.0))
        path = CarbonPricePath.from_knots(ts, vs)
        exp_path = named_carbon_price_path("NDCs")
        for t in np.linspace(2019.0, 2033.0, 29):
            assert carbon_price(path, t) == pytest.approx(
                carbon_price(exp_path, t), rel=2e-4
            )

    def test_validation(self):
        with pytest.raises(ValidationError):
            CarbonPricePath.exponential(2030.0, 2021.0, 30.0, 0.1)
        with pytest.raises(ValidationError):
            CarbonPricePath.exponential(2021.0, 2030.0, -1.0, 0.1)
        with pytest.raises(DomainError):
            carbon_price(named_carbon_price_path("NDCs"), -1.0)


class TestCarbonIntensity:
    def test_initial_value(self):
        c = CarbonIntensityCurve(y0=0.8, g0=-0.05, theta=0.3)
        assert carbon_intensity(c, 0.0) == pytest.approx(0.8, rel=1e-14)

    def test_plateau(self):
        c = CarbonIntensityCurve(y0=0.8, g0=-0.05, theta=0.3, t_star=10.0)
        plateau = 0.8 * math.exp(-0.05 * (1 - math.exp(-3.0)) / 0.3)
        assert carbon_intensity(c, 10.0) == pytest.approx(plateau, rel=1e-14)
        assert carbon_intensity(c, 50.0) == pytest.approx(plateau, rel=1e-14)

    def test_direct_evaluation_vs_ode(self):
        # growth-rate ODE d log y / dt = g0 e^{-theta t}, integrated numerically
        c = CarbonIntensityCurve(y0=1.0, g0=-0.1, theta=0.2)
        expected = math.exp(-0.1 * (1 - math.exp(-1.0)) / 0.2)
        assert carbon_intensity(c, 5.0) == pytest.approx(expected, rel=1e-12)
        log_y = integrate(lambda u: -0.1 * math.exp(-0.2 * u), 0.0, 5.0)
        assert carbon_intensity(c, 5.0) == pytest.approx(math.exp(log_y), rel=1e-9)

    def test_monotone_with_sign_of_growth(self):
        ts = np.linspace(0.0, 9.0, 40)
        falling = CarbonIntensityCurve(y0=1.0, g0=-0.1, theta=0.2, t_star=10.0)
        rising = CarbonIntensityCurve(y0=1.0, g0=0.1, theta=0.2, t_star=10.0)
        assert np.all(np.diff(falling.value(ts)) < 0)
        assert np.all(np.diff(rising.value(ts)) > 0)

    def test_validation(self):
        with pytest.raises(ValidationError):
            CarbonIntensityCurve(y0=0.0, g0=0.1, theta=0.2)
        with pytest.raises(ValidationError):
            CarbonIntensityCurve(y0=1.0, g0=0.1, theta=0.0)


def toy_curves(n, y0=0.002, t_star=2030.0):
    tau = tuple(
        CarbonIntensityCurve(y0=y0 * (i + 1), g0=-0.05, theta=0.3, t0=2021.0, t_star=t_star)
        for i in range(n)
    )
    zeta = tuple(
        tuple(
            CarbonIntensityCurve(
                y0=0.5 * y0 * (i + j + 1), g0=-0.05, theta=0.3, t0=2021.0, t_star=t_star
            )
            for j in range(n)
        )
        for i in range(n)
    )
    kappa = tuple(
        CarbonIntensityCurve(y0=0.7 * y0 * (i + 1), g0=-0.05, theta=0.3, t0=2021.0, t_star=t_star)
        for i in range(n)
    )
    return tau, zeta, kappa


class TestEmissionsCostRate:
    def test_zero_price(self):
        tau, zeta, kappa = toy_curves(3)
        path = CarbonPricePath.exponential(2021.0, 2030.0, 0.0, 0.0)
        d = emissions_cost_rate(path, tau, zeta, kappa, 2025.0)
        assert np.all(d.dtau == 0.0) and np.all(d.dzeta == 0.0) and np.all(d.dkappa == 0.0)

    def test_plateau_after_t_star(self):
        tau, zeta, kappa = toy_curves(2)
        path = named_carbon_price_path("NDCs")
        d1 = emissions_cost_rate(path, tau, zeta, kappa, 2030.0)
        d2 = emissions_cost_rate(path, tau, zeta, kappa, 2040.0)
        np.testing.assert_allclose(d1.dtau, d2.dtau)
        np.testing.assert_allclose(d1.dzeta, d2.dzeta)
        np.testing.assert_allclose(d1.dkappa, d2.dkappa)

    def test_scalar_product(self):
        tau = (CarbonIntensityCurve(y0=0.002, g0=-1e-9, theta=1.0),)
        zeta = ((CarbonIntensityCurve(y0=0.001, g0=-1e-9, theta=1.0),),)
        kappa = (CarbonIntensityCurve(y0=0.001, g0=-1e-9, theta=1.0),)
        path = CarbonPricePath.exponential(0.0, 1.0, 100.0, 0.0)
        d = emissions_cost_rate(path, tau, zeta, kappa, 0.0)
        assert d.dtau[0] == pytest.approx(0.2, rel=1e-6)

    def test_bound_violation(self):
        tau = (CarbonIntensityCurve(y0=0.02, g0=0.01, theta=0.3),)
        zeta = ((CarbonIntensityCurve(y0=0.001, g0=0.01, theta=0.3),),)
        kappa = (CarbonIntensityCurve(y0=0.001, g0=0.01, theta=0.3),)
        path = CarbonPricePath.exponential(0.0, 10.0, 75.0, 0.0)
        with pytest.raises(ValidationError):
            emissions_cost_rate(path, tau, zeta, kappa, 5.0)


class TestEnergyPrice:
    def test_base_price(self):
        model = EnergyPriceModel({"electricity": (0.001, 0.1)})
        path = CarbonPricePath.exponential(2021.0, 2030.0, 0.0, 0.0)
        assert energy_price(model, path, 2025.0) == pytest.approx(0.1)

    def test_affine(self):
        model = EnergyPriceModel({"electricity": (0.001, 0.1)})
        path = CarbonPricePath.exponential(0.0, 1.0, 30.0, 0.0)
        assert energy_price(model, path, 0.5) == pytest.approx(0.13)

    def test_nondecreasing_during_transition(self):
        model = EnergyPriceModel({"electricity": (0.55e-3, 0.2161)})
        path = named_carbon_price_path("Net Zero 2050")
        ts = np.linspace(2021.0, 2030.0, 50)
        prices = [energy_price(model, path, t) for t in ts]
        assert np.all(np.diff(prices) >= 0)


class TestOptimalRenovationTime:
    MODEL = RenovationCostModel(c0=0.01, c1=0.1)
    ENERGY = EnergyPriceModel({"electricity": (0.001, 0.1)})

    def test_renovate_now(self):
        # threshold already exceeded everywhere
        path = CarbonPricePath.exponential(2021.0, 2030.0, 500.0, 0.1)
        t = optimal_renovation_time(
            self.MODEL, self.ENERGY, path, 320.0, 70.0, 0.05, 2022.0
        )
        assert t == 2022.0

    def test_never_renovate(self):
        cheap = EnergyPriceModel({"electricity": (1e-9, 1e-9)})
        path = CarbonPricePath.exponential(2021.0, 2030.0, 30.0, 0.01)
        t = optimal_renovation_time(self.MODEL, cheap, path, 320.0, 70.0, 0.05, 2022.0)
        assert t == math.inf

    def test_degenerate_equal_efficiency(self):
        path = named_carbon_price_path("NDCs")
        t = optimal_renovation_time(self.MODEL, self.ENERGY, path, 70.0, 70.0, 0.05, 2022.0)
        assert t == 2022.0

    def test_closed_form_example(self):
        # threshold 0.2 with f = 0.001 d + 0.1 crosses at 2021 + 10 ln(0.1/0.03)
        model = RenovationCostModel(c0=1.0, c1=0.0)
        # with c1 = 0 the threshold is rbar * c0 = 0.2
        energy = EnergyPriceModel({"electricity": (0.001, 0.1)})
        path = CarbonPricePath.exponential(2021.0, 2060.0, 30.0, 0.1)
        t = optimal_renovation_time(model, energy, path, 3.0, 1.0, 0.2, 2021.0)
        assert t == pytest.approx(2021.0 + 10.0 * math.log(0.1 / 0.03), abs=1e-9)

    def test_closed_form_matches_root_finding(self):
        rng = rng_stream(77, 0)
        n_checked = 0
        for _ in range(100):
            p0 = rng.uniform(20.0, 40.0)
            eta = rng.uniform(0.02, 0.2)
            path = CarbonPricePath.exponential(2021.0, 2031.0, p0, eta)
            energy = EnergyPriceModel(
                {"electricity": (rng.uniform(5e-4, 2e-3), rng.uniform(0.05, 0.2))}
            )
            model = RenovationCostModel(c0=rng.uniform(0.005, 0.02), c1=rng.uniform(0.0, 0.3))
            alpha = rng.uniform(100.0, 350.0)
            t0 = rng.uniform(2021.0, 2026.0)
            args = (model, energy, path, alpha, 70.0, rng.uniform(0.02, 0.1), t0)
            closed = optimal_renovation_time(*args, method="closed-form")
            rooted = optimal_renovation_time(*args, method="root")
            if math.isinf(closed):
                assert math.isinf(rooted)
            else:
                assert abs(closed - rooted) <= 1e-8
                n_checked += 1
        assert n_checked >= 20  # interior crossings did occur

    def test_interior_crossing_satisfies_equation(self):
        path = named_carbon_price_path("Net Zero 2050")
        model = RenovationCostModel(c0=0.01, c1=0.1)
        energy = EnergyPriceModel({"electricity": (0.55e-3, 0.2161)})
        # choose a building for which the crossing is interior
        alpha, alpha_star, rbar = 320.0, 70.0, 0.25
        t = optimal_renovation_time(model, energy, path, alpha, alpha_star, rbar, 2021.0)
        if 2021.0 < t < math.inf:
            threshold = rbar * model.cost(alpha, alpha_star) / (alpha - alpha_star)
            assert energy.price(path, t, "electricity") == pytest.approx(threshold, rel=1e-9)


class TestScenarioRoundTrip:
    def test_from_dict(self):
        d = {
            "name": "toy",
            "t_circ": 2021.0,
            "t_star": 2030.0,
            "carbon_price": {"P0": 33.0, "eta": 0.08},
            "intensities": {
                "tau": [{"y0": 2e-3, "g0": -0.05, "theta": 0.3, "t0": 2021.0}] * 2,
                "zeta": [[{"y0": 1e-3, "g0": -0.05, "theta": 0.3, "t0": 2021.0}] * 2] * 2,
                "kappa": [{"y0": 1e-3, "g0": -0.05, "theta": 0.3, "t0": 2021.0}] * 2,
            },
            "energy": {"electricity": {"f1": 0.55e-3, "f0": 0.2161}},
            "renovation": {"c0": 0.01, "c1": 0.1},
        }
        sc = scenario_from_dict(d)
        assert sc.n_sectors == 2
        sc.validate(np.arange(2021.0, 2035.0))
        d_rate = sc.cost_rate(2025.0)
        assert d_rate.dtau.shape == (2,) and d_rate.dzeta.shape == (2, 2)
        zero = sc.zero_price_twin()
        assert np.all(zero.cost_rate(2025.0).dtau == 0.0)
