"""Parameter estimation from historical data.

Each fit is the simplest standard estimator consistent with the model: least
squares on the closed-form intensity curve, cost shares for elasticities,
exact-discretization regression for the mean-reverting productivity, pooled
regressions for cash-flow loadings, a binomial maximum likelihood for the
default barrier, and trend + AR(1) fits for the housing index. Every fit is a
round trip: data simulated at known parameters must recover them.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from .economy import Elasticities, ProductivityParams, equilibrium_maps, unconditional_state_law
from .errors import DataError, ValidationError
from .collateral import HousingIndexParams
from .numerics import normal_cdf
from .scenario import CarbonIntensityCurve, EmissionsCostRate


@dataclass(frozen=True)
class MacroHistory:
    """Annualised sectoral accounts and emissions over the calibration window.

    Arrays are indexed (year, sector) or (year, consumer sector, input sector);
    inputs[m, i, j] is the value of input j consumed by sector i in year m.
    """

    years: np.ndarray
    output: np.ndarray
    consumption: np.ndarray
    labor: np.ndarray
    inputs: np.ndarray
    emissions_output: np.ndarray
    emissions_inputs: np.ndarray
    emissions_consumption: np.ndarray
    rei: np.ndarray = None

    def __post_init__(self):
        years = np.asarray(self.years, dtype=float)
        object.__setattr__(self, "years", years)
        for name in (
            "output", "consumption", "labor", "inputs",
            "emissions_output", "emissions_inputs", "emissions_consumption",
        ):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape[0] != years.shape[0]:
                raise DataError(f"{name} is not aligned with the year axis")
            if name in ("output", "consumption", "labor", "inputs") and np.any(arr <= 0.0):
                raise DataError(f"{name} must be strictly positive")
        if self.rei is not None:
            object.__setattr__(self, "rei", np.asarray(self.rei, dtype=float))

    @property
    def n_intervals(self):
        return self.years.shape[0] - 1

    @property
    def dt(self):
        steps = np.diff(self.years)
        if steps.size == 0 or np.any(steps <= 0.0):
            raise DataError("years must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-9:
            raise DataError("estimators require a uniform observation grid")
        return float(steps[0])


@dataclass(frozen=True)
class DefaultHistory:
    """Rated and defaulted counts per year for one rating group."""

    years: np.ndarray
    rated: np.ndarray
    defaulted: np.ndarray

    def __post_init__(self):
        years = np.asarray(self.years, dtype=float)
        rated = np.asarray(self.rated, dtype=int)
        defaulted = np.asarray(self.defaulted, dtype=int)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "rated", rated)
        object.__setattr__(self, "defaulted", defaulted)
        if not (years.shape == rated.shape == defaulted.shape):
            raise DataError("default history arrays must be aligned")
        if np.any(defaulted < 0) or np.any(defaulted > rated):
            raise DataError("need 0 <= defaulted <= rated")


def fit_intensities(years, emissions, values, theta_grid=None, polish=True):
    """Fit one saturating-growth intensity curve to emissions / value data.

    Profile least squares: for each candidate decay rate the level and growth
    enter linearly; the best grid candidate is then polished by a bounded
    scalar search unless polish is disabled.

    Raises:
        DataError: with fewer than 3 observations.
    """
    years = np.asarray(years, dtype=float)
    emissions = np.asarray(emissions, dtype=float)
    values = np.asarray(values, dtype=float)
    if years.size < 3:
        raise DataError("intensity fit needs at least 3 observations")
    if np.any(values <= 0.0) or np.any(emissions <= 0.0):
        raise DataError("intensity fit needs positive emissions and values")
    log_y = np.log(emissions / values)
    s = years - years[0]

    def subfit(theta):
        x = (1.0 - np.exp(-theta * s)) / theta
        design = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(design, log_y, rcond=None)
        resid = log_y - design @ coef
        return float(resid @ resid), coef

    if theta_grid is None:
        theta_grid = np.geomspace(1e-3, 5.0, 60)
    best_theta, best_rss, best_coef = None, np.inf, None
    for theta in theta_grid:
        rss, coef = subfit(theta)
        if rss < best_rss:
            best_theta, best_rss, best_coef = theta, rss, coef
    if polish:
        res = minimize_scalar(
            lambda lt: subfit(math.exp(lt))[0],
            bounds=(math.log(best_theta / 2.0), math.log(best_theta * 2.0)),
            method="bounded",
            options={"xatol": 1e-12},
        )
        rss, coef = subfit(math.exp(res.x))
        if rss < best_rss:
            best_theta, best_rss, best_coef = math.exp(res.x), rss, coef
    return CarbonIntensityCurve(
        y0=float(np.exp(best_coef[0])),
        g0=float(best_coef[1]),
        theta=float(best_theta),
        t0=float(years[0]),
    ), best_rss


def fit_elasticities(history, phi=1.0):
    """Time-averaged cost shares, with constant returns enforced exactly."""
    shares = history.inputs / history.output[:, :, None]
    lam = shares.mean(axis=0)
    psi = 1.0 - lam.sum(axis=1)
    if np.any(psi <= 0.0):
        raise DataError("input shares exceed output value: negative labor share")
    try:
        return Elasticities(psi=psi, lam=lam, phi=phi)
    except ValidationError as exc:
        raise DataError(f"inconsistent elasticity data: {exc}") from exc


def fit_productivity(history, elasticities, varsigma=1.0):
    """Mean-reversion parameters from the observable growth-rate averages.

    The growth rates recovered from output growth are interval averages of
    the latent mean-reverting process, which attenuates a naive step-on-step
    regression. For interval averages the lag-2 to lag-1 autocovariance ratio
    equals the one-step decay matrix exactly, so the decay is estimated from
    that moment condition, the continuous-time matrix by principal logarithm,
    and the stationary covariance from the closed-form lag-1 moment; the
    diffusion follows from the continuous Lyapunov relation.
    """
    dt = history.dt
    dlog_y = np.diff(np.log(history.output), axis=0)
    eye = np.eye(elasticities.n_sectors)
    theta_hat = (dlog_y / dt) @ (eye - elasticities.lam).T
    mu = theta_hat.mean(axis=0)
    w = (theta_hat - mu) / varsigma
    m = w.shape[0]
    if m < 4:
        raise DataError("productivity fit needs at least 4 growth observations")
    c0 = w.T @ w / m
    c1 = w[1:].T @ w[:-1] / (m - 1)
    c2 = w[2:].T @ w[:-2] / (m - 2)
    persistence = np.linalg.norm(c1, 2) / max(np.linalg.norm(c0, 2), 1e-300)
    if persistence < 0.1:
        warnings.warn(
            "near-unidentifiable mean reversion: lag-1 autocovariance is "
            f"{persistence:.3f} of the variance (white-noise-like data, "
            f"lag-1 condition number {np.linalg.cond(c1):.2e})",
            stacklevel=2,
        )
    g = c2 @ np.linalg.inv(c1)
    eig = np.linalg.eigvals(g)
    if np.any(np.abs(eig) >= 1.0):
        raise DataError(
            f"decay matrix has eigenvalue moduli >= 1 ({np.abs(eig)}); "
            "the data are not mean reverting"
        )
    if np.any((np.real(eig) <= 0.0) & (np.abs(np.imag(eig)) < 1e-12)):
        raise DataError("decay matrix has eigenvalues on the closed negative real axis")
    gamma = -np.real(scipy.linalg.logm(g)) / dt
    # lag-1 moment of interval averages: C1 = Gamma^-2 (I - G)^2 V / dt^2
    g_inv = np.linalg.inv(gamma)
    m_mat = g_inv @ g_inv @ (eye - g) @ (eye - g) / dt**2
    v_inf = np.linalg.solve(m_mat, c1)
    v_inf = 0.5 * (v_inf + v_inf.T)
    ss = gamma @ v_inf + v_inf @ gamma.T
    ss = 0.5 * (ss + ss.T)
    vals, vec = np.linalg.eigh(ss)
    if np.any(vals <= 0.0):
        raise DataError("implied diffusion covariance is not positive definite")
    sigma = vec @ np.diag(np.sqrt(vals)) @ vec.T
    return ProductivityParams(mu=mu, gamma=gamma, sigma=sigma, varsigma=varsigma)


def fit_firm_loadings(cash_flows, output_growth, dt, elasticities=None):
    """Pooled group regression of summed log cash-flow growth on output growth.

    cash_flows has one row per firm of the group (levels, M+1 columns);
    output_growth is (M, I). The regression coefficients load on output
    growth; when elasticities are supplied they are mapped to loadings on the
    cumulative-growth factor (the convention used by the valuation model).
    Returns the loading vector and the cash-flow volatility.
    """
    cash_flows = np.asarray(cash_flows, dtype=float)
    output_growth = np.asarray(output_growth, dtype=float)
    if cash_flows.ndim != 2 or cash_flows.shape[1] != output_growth.shape[0] + 1:
        raise DataError("cash-flow panel must align with the growth series")
    if cash_flows.shape[0] * output_growth.shape[0] < 2:
        raise DataError("need at least two pooled firm-year observations")
    n_firms = cash_flows.shape[0]
    y = np.diff(np.log(cash_flows), axis=1).sum(axis=0)
    x = n_firms * output_growth
    gram = x.T @ x
    if np.linalg.cond(gram) > 1e12:
        raise DataError("degenerate output-growth regressor")
    beta = np.linalg.solve(gram, x.T @ y)
    resid = y - x @ beta
    dof = max(y.shape[0] - beta.shape[0], 1)
    sigma = math.sqrt(float(resid @ resid) / dof / (dt * n_firms))
    if elasticities is None:
        return beta, sigma
    eye = np.eye(elasticities.n_sectors)
    loadings = np.linalg.solve((eye - elasticities.lam).T, beta)
    return loadings, sigma


def fit_collateral_asset(cash_flows, output_growth, dt, elasticities=None):
    """Loading and volatility of one collateral cash-flow series (unpooled)."""
    cash_flows = np.asarray(cash_flows, dtype=float)
    if cash_flows.ndim != 1 or cash_flows.size < 4:
        raise DataError("collateral fit needs a level series of length >= 4")
    return fit_firm_loadings(cash_flows[None, :], output_growth, dt, elasticities)


def _barrier_log_likelihood(log_b, history, pd_fn):
    """Sum over years of log E_state[binomial pmf at the drawn-state PD]."""
    total = 0.0
    for m in range(history.years.size):
        r_m = int(history.rated[m])
        d_m = int(history.defaulted[m])
        pd = np.clip(pd_fn(m, math.exp(log_b)), 1e-300, 1.0 - 1e-16)
        log_pmf = (
            math.lgamma(r_m + 1) - math.lgamma(d_m + 1) - math.lgamma(r_m - d_m + 1)
            + d_m * np.log(pd)
            + (r_m - d_m) * np.log1p(-pd)
        )
        peak = np.max(log_pmf)
        total += peak + math.log(np.mean(np.exp(log_pmf - peak)))
    return total


def fit_barrier_mle(
    history, params, elasticities, loadings, sigma, f0, r,
    n_state_draws=512, seed=0, log_b_bounds=(-5.0, 8.0),
):
    """Debt barrier of a rating group by binomial maximum likelihood.

    The latent state (growth level and rate) at each observation year is
    integrated out with a fixed scrambled low-discrepancy sample of its
    unconditional Gaussian law, the one-year default probability is evaluated
    at zero carbon price, and the scalar barrier (debt-to-median-cash-flow
    ratio, indexed to trend growth) maximises the likelihood by bounded
    search. With no observed defaults the boundary is flagged and the barrier
    pinned so the mean PD is 1 / (2 * total rated).
    """
    loadings = np.asarray(loadings, dtype=float)
    n = params.n_sectors
    rate = 0.5 * sigma**2 + float(loadings @ params.mu) - r
    if rate >= 0.0:
        raise ValidationError("divergent valuation in the barrier likelihood")
    maps0 = equilibrium_maps(elasticities, EmissionsCostRate.zero(n))
    v0 = maps0.output_shifter
    rint0 = -math.exp(float(loadings @ v0)) / rate
    ups1 = params.upsilon(1.0)
    var_proj_base = float(loadings @ params.noise_covariances(1.0)["aa"] @ loadings)
    a_mu = float(loadings @ params.mu)

    sob = qmc.Sobol(d=2 * n, scramble=True, seed=seed)
    u = sob.random(n_state_draws)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    gauss = np.array([scipy.special.ndtri(u[:, j]) for j in range(2 * n)]).T

    states = []
    for m in range(history.years.size):
        t_m = float(history.years[m])
        law = unconditional_state_law(params, t_m)
        mean, cov = law.joint()
        chol = np.linalg.cholesky(cov + 1e-14 * np.eye(2 * n))
        draws = mean[None, :] + gauss @ chol.T
        z_m, a_m = draws[:, :n], draws[:, n:]
        # projected log-value pieces at horizon 1, zero carbon price
        mean1 = (
            math.log(f0 * rint0)
            + a_mu
            + params.varsigma * (z_m @ (ups1.T @ loadings))
            + (a_m @ loadings)
        )
        std1 = math.sqrt(var_proj_base + (t_m + 1.0) * sigma**2)
        states.append((t_m, mean1, std1))

    def pd_fn(m, barrier):
        t_m, mean1, std1 = states[m]
        log_debt = math.log(barrier * f0) + a_mu * (t_m + 1.0)
        return normal_cdf((log_debt - mean1) / std1)

    if history.defaulted.sum() == 0:
        warnings.warn(
            "no defaults observed: barrier pinned at the boundary heuristic",
            stacklevel=2,
        )
        target = 1.0 / (2.0 * float(history.rated.sum()))

        def mean_pd(log_b):
            return np.mean(
                [np.mean(pd_fn(m, math.exp(log_b))) for m in range(history.years.size)]
            )

        lo, hi = log_b_bounds
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mean_pd(mid) < target:
                lo = mid
            else:
                hi = mid
        return math.exp(0.5 * (lo + hi))

    res = minimize_scalar(
        lambda lb: -_barrier_log_likelihood(lb, history, pd_fn),
        bounds=log_b_bounds,
        method="bounded",
        options={"xatol": 1e-8},
    )
    return float(math.exp(res.x))


def fit_housing_index(years, rei, brownian_increments=None):
    """Housing index parameters: linear trend, AR(1) reversion, noise loadings.

    The trend of the log index gives the long-run line; the detrended
    residuals give the reversion rate by a bias-corrected AR(1) coefficient
    and the volatility from the innovation variance; the correlation loadings
    come from regressing the innovations on the supplied productivity
    Brownian increments (zero when not supplied).
    """
    years = np.asarray(years, dtype=float)
    rei = np.asarray(rei, dtype=float)
    if years.size != rei.size or years.size < 4:
        raise DataError("housing fit needs aligned series of length >= 4")
    if np.any(rei <= 0.0):
        raise DataError("housing index must be positive")
    steps = np.diff(years)
    dt = float(steps[0])
    if np.any(np.abs(steps - dt) > 1e-9):
        raise DataError("housing fit requires a uniform grid")
    k = np.log(rei)
    t = years - years[0]
    design = np.column_stack([np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(design, k, rcond=None)
    intercept, slope = float(coef[0]), float(coef[1])
    resid = k - design @ coef
    m = resid.size - 1
    if float(resid @ resid) / resid.size < 1e-20:
        warnings.warn(
            "trend-only index: reversion rate is unidentifiable", stacklevel=2
        )
        return HousingIndexParams(
            nu=1.0, sigma=1e-9, rho=np.zeros(1), trend_slope=slope,
            trend_intercept=intercept, k0=float(k[0]),
        )
    x, y = resid[:-1], resid[1:]
    phi = float(x @ y / (x @ x))
    # first-order bias correction for an AR(1) fitted on detrended data
    phi = phi + (2.0 + 4.0 * phi) / m
    phi = min(max(phi, 1e-6), 1.0 - 1e-6)
    nu = -math.log(phi) / dt
    innov = y - phi * x
    innov_var = float(innov @ innov) / max(innov.size - 1, 1)
    sigma = math.sqrt(innov_var * 2.0 * nu / (1.0 - math.exp(-2.0 * nu * dt)))
    if brownian_increments is None:
        rho = np.zeros(1)
    else:
        db = np.asarray(brownian_increments, dtype=float)
        if db.shape[0] != innov.size:
            raise DataError("Brownian increments must align with the innovations")
        rho = innov @ db / (sigma * dt * innov.size)
        norm = np.linalg.norm(rho)
        if norm > 1.0:
            rho = rho / norm
    return HousingIndexParams(
        nu=nu, sigma=sigma, rho=rho, trend_slope=slope,
        trend_intercept=intercept, k0=float(k[0]),
    )
