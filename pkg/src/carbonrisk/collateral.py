"""Collateral valuation and loss-given-default closed forms.

Two collateral classes are supported beyond unsecured lending: a financial
asset (a share of a dividend stream valued like an obligor) and a building
(an efficient-twin price following an exponential mean-reverting index minus
the discounted cost of energy inefficiency). The LGD formulas combine
truncated log-normal expectations with the joint Gaussian law of the obligor
and collateral log values.

All closed forms are vectorized over conditional means, so a Monte Carlo
layer can evaluate thousands of states in one call.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .firm import GaussianLaw, growth_adjusted_rate, r_integral, value_conditional_law
from .numerics import (
    QuadratureSpec,
    bivariate_normal_cdf,
    integrate,
    normal_cdf,
    normal_quantile,
)
from .scenario import optimal_renovation_time

_X_QUAD = QuadratureSpec(abs_tol=1e-10, max_subdivisions=20_000)

#: Default probabilities below this level are treated as "no default event":
#: the conditional loss is undefined on a null event and LGD falls back to
#: the unsecured level.
PD_FLOOR = 1e-300

#: Correlations are clipped inside the open interval before the bivariate CDF
#: so quadrature round-off cannot produce invalid inputs.
RHO_CLIP = 1.0 - 1e-12


@dataclass(frozen=True)
class RecoveryParams:
    """Recovery machinery of one loan.

    gamma: fraction of the residual shortfall recovered by other means.
    k: fraction of the collateral consumed by the liquidation process.
    delay: years between default and the end of liquidation.
    r: discount rate applied over the liquidation delay.
    rbar: discount rate of the housing inefficiency cost (defaults to r).
    """

    gamma: float
    k: float = 0.0
    delay: float = 0.0
    r: float = 0.05
    rbar: float = None

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValidationError("residual recovery gamma must lie in [0, 1)")
        if not (0.0 <= self.k < 1.0):
            raise ValidationError("liquidation cost k must lie in [0, 1)")
        if self.delay < 0.0:
            raise ValidationError("liquidation delay must be >= 0")
        if self.r <= 0.0:
            raise ValidationError("discount rate must be > 0")
        if self.rbar is None:
            object.__setattr__(self, "rbar", self.r)
        elif self.rbar <= 0.0:
            raise ValidationError("housing discount rate must be > 0")


@dataclass(frozen=True)
class NoCollateral:
    kind = "none"


@dataclass(frozen=True)
class FinancialAssetCollateral:
    """A share of an investment whose cash flows load on sector output growth."""

    kind = "financial"
    share: float
    fbar0: float
    loadings: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "loadings", np.asarray(self.loadings, dtype=float))
        if not (0.0 < self.share <= 1.0):
            raise ValidationError("collateral share must lie in (0, 1]")
        if self.fbar0 <= 0.0 or self.sigma <= 0.0:
            raise ValidationError("collateral cash flow and volatility must be > 0")


@dataclass(frozen=True)
class BuildingCollateral:
    """A property: price per square meter, surface, and energy efficiency."""

    kind = "building"
    price_sqm: float
    surface: float
    alpha: float
    alpha_star: float
    energy_type: str = "electricity"

    def __post_init__(self):
        if self.price_sqm <= 0.0 or self.surface <= 0.0:
            raise ValidationError("building price and surface must be > 0")
        if not self.alpha >= self.alpha_star > 0.0:
            raise ValidationError("need efficiency alpha >= alpha_star > 0")


@dataclass(frozen=True)
class HousingIndexParams:
    """Log housing index: mean reversion at rate nu toward a linear trend.

    The index noise correlates with the productivity Brownian motion through
    the loading vector rho (|rho| <= 1); trend chi(t) = slope * t + intercept
    on the model clock, with the index at K0 at the clock origin.
    """

    nu: float
    sigma: float
    rho: np.ndarray
    trend_slope: float
    trend_intercept: float
    k0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        if self.nu <= 0.0 or self.sigma <= 0.0:
            raise ValidationError("index mean reversion and volatility must be > 0")
        if np.linalg.norm(self.rho) > 1.0 + 1e-12:
            raise ValidationError("productivity correlation loadings need |rho| <= 1")

    def chi(self, t):
        return self.trend_slope * np.asarray(t, dtype=float) + self.trend_intercept


@dataclass(frozen=True)
class GaussianPairLaw:
    """Joint Gaussian law of (log obligor value, log collateral value)."""

    mean1: float
    mean2: float
    var1: float
    var2: float
    cov: float

    @property
    def correlation(self):
        denom = np.sqrt(self.var1 * self.var2)
        rho = np.where(denom > 0.0, self.cov / np.where(denom > 0.0, denom, 1.0), 0.0)
        return np.clip(rho, -RHO_CLIP, RHO_CLIP)


def truncated_put_lognormal(u, k, ead, m, s):
    """E[(u - (1-k) K / EAD)+] for log K Gaussian with mean m and std s.

    Vectorized over m and s. s = 0 degenerates to the deterministic payoff.
    """
    if np.any(np.asarray(u) <= 0.0) or np.any(np.asarray(ead) <= 0.0):
        raise DomainError("u and EAD must be > 0")
    if not (0.0 <= k < 1.0):
        raise DomainError("liquidation cost k must lie in [0, 1)")
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise DomainError("standard deviation must be >= 0")
    w = np.log(u * ead / (1.0 - k)) - m
    s_safe = np.where(s > 0.0, s, 1.0)
    regular = u * (
        normal_cdf(w / s_safe)
        - np.exp(-w + 0.5 * s * s) * normal_cdf(w / s_safe - s)
    )
    degenerate = np.maximum(u - (1.0 - k) * np.exp(m) / ead, 0.0)
    out = np.where(s > 0.0, regular, degenerate)
    out = np.clip(out, 0.0, u)
    return float(out) if out.ndim == 0 else out


def joint_put_indicator(u, k, delay, r, ead, pair, pd):
    """E[(u - (1-k) e^{-r a} K / EAD)+ 1{default}] under the joint Gaussian law.

    pair carries the projected law of the log obligor value (mean1, var1), the
    law of the log collateral value at liquidation (mean2, var2), and their
    covariance. pd is the marginal default probability implied by mean1/var1.
    Vectorized over the law fields and pd. A zero collateral variance
    degenerates to the deterministic-collateral branch.
    """
    if np.any(np.asarray(u) <= 0.0) or np.any(np.asarray(ead) <= 0.0):
        raise DomainError("u and EAD must be > 0")
    if not (0.0 <= k < 1.0) or delay < 0.0 or r <= 0.0:
        raise DomainError("invalid liquidation parameters")
    pd = np.asarray(pd, dtype=float)
    if np.any(pd <= 0.0) or np.any(pd >= 1.0):
        raise DomainError("pd must lie in (0, 1)")
    u = np.asarray(u, dtype=float)
    disc = (1.0 - k) * math.exp(-r * delay)
    lbar = np.asarray(pair.var2, dtype=float)
    if np.any(lbar < 0.0):
        raise DomainError("collateral variance must be >= 0")
    kbar = np.asarray(pair.mean2, dtype=float)
    threshold = normal_quantile(pd)
    rho = pair.correlation

    sbar = np.sqrt(np.where(lbar > 0.0, lbar, 1.0))
    omega = (np.log(u * ead / disc) - kbar) / sbar
    regular = u * (
        bivariate_normal_cdf(omega, threshold, rho)
        - np.exp(0.5 * lbar - sbar * omega)
        * bivariate_normal_cdf(omega - sbar, threshold - rho * sbar, rho)
    )
    degenerate = np.maximum(u - disc * np.exp(kbar) / ead, 0.0) * pd
    out = np.where(lbar > 0.0, regular, degenerate)
    out = np.clip(out, 0.0, u * pd)
    return float(out) if out.ndim == 0 else out


def financial_asset_value(spec, market, vcurve, state, wbar):
    """Spot value of the financial-asset collateral at the state's date."""
    date = market.epoch + state.t
    rint = r_integral(spec.loadings, spec.sigma, market, vcurve, date)
    expo = float(spec.loadings @ (state.a_circ - vcurve(market.epoch))) + spec.sigma * wbar
    return spec.share * spec.fbar0 * rint * math.exp(expo)


def financial_asset_laws(spec, market, vcurve, state, horizon, rint_now=None, rint_fwd=None):
    """Spot and projected Gaussian laws of the log collateral value.

    Reuses the obligor valuation machinery with the collateral's scaled
    initial cash flow, loadings, and volatility.
    """

    class _Shim:
        f0 = spec.share * spec.fbar0
        loadings = spec.loadings
        sigma = spec.sigma

    return value_conditional_law(
        _Shim, market, vcurve, state, horizon, rint_now=rint_now, rint_fwd=rint_fwd
    )


def validate_financial_asset(spec, market):
    rate = growth_adjusted_rate(spec.loadings, spec.sigma, market)
    if rate >= 0.0:
        raise ValidationError(
            f"divergent collateral valuation: sigma^2/2 + a.mu - r = {rate:.6f} >= 0"
        )


def productivity_cross_cov(prod, loadings, bar_loadings, horizon, delay):
    """Covariance of the cumulative-growth terms a.A(t+T) and abar.A(t+T+a).

    Closed quadrature of the overlapping-window integrand; zero at T = 0.
    """
    if horizon < 0.0 or delay < 0.0:
        raise DomainError("horizon and delay must be >= 0")
    if horizon == 0.0:
        return 0.0
    n = prod.n_sectors
    eye = np.eye(n)
    ss = prod.sigma @ prod.sigma.T
    e_delay = prod.expm_gamma(delay)

    def f(u):
        e = prod.expm_gamma(u)
        return (e - eye) @ ss @ (e_delay @ e - eye).T

    inner = integrate(f, 0.0, horizon, _X_QUAD)
    g_inv = np.linalg.inv(prod.gamma)
    a = np.asarray(loadings, dtype=float)
    abar = np.asarray(bar_loadings, dtype=float)
    return prod.varsigma**2 * float(a @ g_inv @ inner @ g_inv.T @ abar)


def firm_collateral_cross_cov(firm, spec, market, state, horizon, delay):
    """Covariance and correlation of projected log firm and collateral values."""
    prod = market.productivity
    cov = productivity_cross_cov(prod, firm.loadings, spec.loadings, horizon, delay)
    aa_t = prod.noise_covariances(horizon)["aa"]
    var1 = float(firm.loadings @ aa_t @ firm.loadings) + (state.t + horizon) * firm.sigma**2
    aa_ta = prod.noise_covariances(horizon + delay)["aa"]
    var2 = (
        float(spec.loadings @ aa_ta @ spec.loadings)
        + (state.t + horizon + delay) * spec.sigma**2
    )
    denom = math.sqrt(var1 * var2)
    rho = 0.0 if denom == 0.0 else cov / denom
    return cov, float(np.clip(rho, -RHO_CLIP, RHO_CLIP))


def housing_cross_cov(prod, loadings, index, horizon, delay):
    """Covariance of a.A(t+T) with the housing-index noise integral at t+T+a."""
    if horizon < 0.0 or delay < 0.0:
        raise DomainError("horizon and delay must be >= 0")
    if horizon == 0.0:
        return 0.0
    n = prod.n_sectors
    eye = np.eye(n)
    nu = index.nu

    def f(u):
        return math.exp(-nu * (u + delay)) * ((eye - prod.expm_gamma(u)) @ prod.sigma)

    inner = integrate(f, 0.0, horizon, _X_QUAD)
    g_inv = np.linalg.inv(prod.gamma)
    a = np.asarray(loadings, dtype=float)
    return index.sigma * prod.varsigma * float(a @ g_inv @ inner @ index.rho)


def inefficiency_cost(building, scenario, rbar, date):
    """Discounted extra energy cost X of the building's inefficiency at a date.

    Renovation happens at the optimal time; until then the owner pays the
    energy-price gap on the efficiency shortfall. The renovation cost term
    disappears when renovation is never optimal, and the integral's plateau
    tail (beyond the transition end) is exact.
    """
    if building.alpha == building.alpha_star:
        return 0.0
    gap = building.alpha - building.alpha_star
    path = scenario.price_path
    energy = scenario.energy
    reno_time = optimal_renovation_time(
        scenario.renovation, energy, path, building.alpha, building.alpha_star,
        rbar, date, energy_type=building.energy_type,
    )
    price = lambda s: energy.price(path, s, building.energy_type)
    if math.isinf(reno_time):
        split = max(date, path.t_star)
        head = integrate(
            lambda s: price(s) * math.exp(-rbar * (s - date)), date, split, _X_QUAD
        )
        tail = price(path.t_star) * math.exp(-rbar * (split - date)) / rbar
        return gap * (head + tail)
    cost = scenario.renovation.cost(building.alpha, building.alpha_star)
    head = integrate(
        lambda s: price(s) * math.exp(-rbar * (s - date)), date, reno_time, _X_QUAD
    )
    return cost * math.exp(-rbar * (reno_time - date)) + gap * head


def housing_value(building, index, scenario, recovery, state, k_t, market_epoch=0.0):
    """Market value of the building: efficient-twin price minus inefficiency.

    k_t is the realized log index level at the state's date. The value may be
    negative for deeply inefficient buildings under harsh scenarios.
    """
    date = market_epoch + state.t
    twin = building.surface * building.price_sqm * math.exp(k_t)
    x = inefficiency_cost(building, scenario, recovery.rbar, date)
    return twin - building.surface * x


def housing_conditional_law(index, building, t, horizon, h_t):
    """Gaussian law of the log efficient-twin price at t + horizon given time t.

    h_t is the realized vector of the accumulated index-vs-productivity noise
    integral (supplied by the simulation layer); it enters the mean through
    the correlated part of the index noise. Vectorized over rows of h_t.
    """
    if horizon < 0.0 or t < 0.0:
        raise DomainError("t and horizon must be >= 0")
    nu, sig = index.nu, index.sigma
    rho_norm2 = float(index.rho @ index.rho)
    h_t = np.asarray(h_t, dtype=float)
    carried = sig * math.exp(-nu * horizon) * (h_t @ index.rho)
    mean = (
        math.log(building.surface * building.price_sqm)
        + index.chi(t + horizon)
        - (index.chi(0.0) - index.k0) * math.exp(-nu * (t + horizon))
        + carried
    )
    var = (sig**2) * rho_norm2 / (2.0 * nu) * (1.0 - math.exp(-2.0 * nu * horizon)) + (
        sig**2
    ) * (1.0 - rho_norm2) / (2.0 * nu) * (1.0 - math.exp(-2.0 * nu * (t + horizon)))
    return GaussianLaw(mean=mean if np.ndim(mean) else float(mean), var=float(var))


def lgd_spot(collateral, recovery, ead_value, collateral_law=None, inefficiency=0.0):
    """Spot loss given default at the evaluation date.

    Requires zero liquidation delay (the spot closed forms assume it); for a
    positive delay use :func:`lgd_projected` at horizon zero. For buildings,
    ``inefficiency`` is the per-square-meter cost X and ``collateral_law``
    the law of the log efficient-twin price.
    """
    one_minus = 1.0 - recovery.gamma
    if collateral.kind == "none":
        return one_minus
    if recovery.delay != 0.0:
        raise DomainError(
            "spot LGD closed forms assume zero liquidation delay; "
            "use lgd_projected at horizon 0"
        )
    if collateral_law is None:
        raise DomainError("secured spot LGD needs the collateral law")
    s = np.sqrt(np.asarray(collateral_law.var, dtype=float))
    if collateral.kind == "financial":
        value = truncated_put_lognormal(
            1.0, recovery.k, ead_value, collateral_law.mean, s
        )
        out = one_minus * value
        return np.clip(out, 0.0, one_minus) if np.ndim(out) else min(max(out, 0.0), one_minus)
    if collateral.kind == "building":
        u = 1.0 + (1.0 - recovery.k) * collateral.surface * inefficiency / ead_value
        value = truncated_put_lognormal(
            u, recovery.k, ead_value, collateral_law.mean, s
        )
        return one_minus * value
    raise DomainError(f"unknown collateral kind {collateral.kind!r}")


def lgd_projected(collateral, recovery, ead_value, pair=None, pd=None, inefficiency=0.0):
    """Projected loss given default over a horizon.

    Composes the joint truncated expectation with the appropriate payoff cap
    and divides by the default probability; a numerically null pd falls back
    to the unsecured level (no default event to condition on).
    """
    one_minus = 1.0 - recovery.gamma
    if collateral.kind == "none":
        return one_minus
    if pair is None or pd is None:
        raise DomainError("secured projected LGD needs the pair law and pd")
    pd = np.asarray(pd, dtype=float)
    tiny = pd < PD_FLOOR
    pd_safe = np.where(tiny, 0.5, pd)
    if collateral.kind == "financial":
        u = 1.0
    elif collateral.kind == "building":
        u = (
            1.0
            + (1.0 - recovery.k)
            * math.exp(-recovery.r * recovery.delay)
            * collateral.surface
            * inefficiency
            / ead_value
        )
    else:
        raise DomainError(f"unknown collateral kind {collateral.kind!r}")
    value = joint_put_indicator(
        u, recovery.k, recovery.delay, recovery.r, ead_value, pair, pd_safe
    )
    out = one_minus * value / pd_safe
    out = np.where(tiny, one_minus, out)
    return float(out) if out.ndim == 0 else out
