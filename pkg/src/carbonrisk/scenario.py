"""Deterministic climate-transition inputs.

A transition scenario bundles a carbon-price path, per-sector carbon-intensity
curves, an energy-price model, and a renovation-cost model. All curves are
immutable after construction and freely shared across workers.

Index conventions (used consistently across the package):
    tau[i]      intensity on the output of sector i
    zeta[i][j]  intensity on sector i's intermediate consumption of input j
    kappa[i]    intensity on household consumption of good i
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, ValidationError

#: Transition start/end and carbon-price parameters of the four named NGFS
#: scenarios: price at the start of the transition (euro/tCO2e) and annual
#: exponential growth rate.
NAMED_SCENARIOS = {
    "Current Policies": (30.957, 0.01693),
    "NDCs": (33.321, 0.07994),
    "Divergent Net Zero": (32.963, 0.12893),
    "Net Zero 2050": (34.315, 0.17935),
}

#: Scenario order from softest to hardest transition (carbon-price dominance
#: on the annual grid).
SCENARIO_ORDER = [
    "Current Policies",
    "NDCs",
    "Divergent Net Zero",
    "Net Zero 2050",
]


@dataclass(frozen=True)
class CarbonPricePath:
    """Carbon price in euro/tCO2e: constant before t_circ and after t_star.

    Either the exponential transition (p0, eta) or a user-supplied sampled
    curve interpolated monotone-cubically between its knots.
    """

    t_circ: float
    t_star: float
    p0: float
    eta: float = 0.0
    knots_t: tuple = ()
    knots_v: tuple = ()
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.t_circ < self.t_star:
            raise ValidationError("carbon price path requires t_circ < t_star")
        if self.p0 < 0.0 or self.eta < 0.0:
            raise ValidationError("carbon price level and growth must be >= 0")
        if self.knots_t:
            ts = np.asarray(self.knots_t, dtype=float)
            vs = np.asarray(self.knots_v, dtype=float)
            if ts.size != vs.size or ts.size < 2:
                raise ValidationError("need at least two (t, value) knots")
            if np.any(np.diff(ts) <= 0.0) or np.any(vs < 0.0):
                raise ValidationError("knots must be increasing in t with values >= 0")
            object.__setattr__(self, "_interp", PchipInterpolator(ts, vs))

    @classmethod
    def exponential(cls, t_circ, t_star, p0, eta):
        return cls(t_circ=t_circ, t_star=t_star, p0=p0, eta=eta)

    @classmethod
    def from_knots(cls, ts, vs):
        ts = tuple(float(t) for t in ts)
        vs = tuple(float(v) for v in vs)
        return cls(t_circ=ts[0], t_star=ts[-1], p0=vs[0], knots_t=ts, knots_v=vs)

    @property
    def is_exponential(self):
        return self._interp is None

    def value(self, t):
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, self.t_circ, self.t_star)
        if self._interp is None:
            out = self.p0 * np.exp(self.eta * (tc - self.t_circ))
        else:
            out = np.maximum(self._interp(tc), 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def terminal_price(self):
        return self.value(self.t_star)


def named_carbon_price_path(name, t_circ=2021.0, t_star=2030.0):
    """The carbon-price path of one of the four named scenarios."""
    try:
        p0, eta = NAMED_SCENARIOS[name]
    except KeyError:
        raise DomainError(f"unknown scenario {name!r}; expected one of {SCENARIO_ORDER}")
    return CarbonPricePath.exponential(t_circ, t_star, p0, eta)


def carbon_price(path, t):
    """Carbon price at date t (euro/tCO2e)."""
    if np.any(np.asarray(t, dtype=float) < 0.0):
        raise DomainError("carbon_price requires t >= 0")
    return path.value(t)


@dataclass(frozen=True)
class CarbonIntensityCurve:
    """Saturating-growth intensity y0 * exp(g0 * (1 - e^{-theta (t-t0)}) / theta).

    Constant at its initial level before t0 and frozen at its t_star value
    afterwards. g0 may be negative (declining intensities); the level y0 and
    the decay rate theta must be positive.
    """

    y0: float
    g0: float
    theta: float
    t0: float = 0.0
    t_star: float = math.inf

    def __post_init__(self):
        if self.y0 <= 0.0 or self.theta <= 0.0:
            raise ValidationError("intensity curve requires y0 > 0 and theta > 0")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        s = np.clip(t, self.t0, self.t_star) - self.t0
        out = self.y0 * np.exp(self.g0 * (1.0 - np.exp(-self.theta * s)) / self.theta)
        return float(out) if out.ndim == 0 else out


def carbon_intensity(curve, t):
    """Carbon intensity at date t (tCO2e/euro)."""
    if np.any(np.asarray(t, dtype=float) < 0.0):
        raise DomainError("carbon_intensity requires t >= 0")
    return curve.value(t)


@dataclass(frozen=True)
class EmissionsCostRate:
    """Unitless carbon-cost wedges at one date: price times intensity.

    dtau[i] on output of sector i, dzeta[i, j] on sector i's use of input j,
    dkappa[i] on consumption of good i.
    """

    dtau: np.ndarray
    dzeta: np.ndarray
    dkappa: np.ndarray

    @classmethod
    def zero(cls, n_sectors):
        return cls(
            np.zeros(n_sectors), np.zeros((n_sectors, n_sectors)), np.zeros(n_sectors)
        )

    @property
    def n_sectors(self):
        return self.dtau.shape[0]


def emissions_cost_rate(path, tau_curves, zeta_curves, kappa_curves, t):
    """Emissions cost rates delta_t * (tau_t, zeta_t, kappa_t) at date t.

    Raises:
        ValidationError: when the production-vs-emissions bound
            delta_t * max_i tau_i(t0) >= 1 is violated.
    """
    delta = path.value(t)
    tau0 = max(c.y0 for c in tau_curves)
    if delta * tau0 >= 1.0:
        raise ValidationError(
            f"emissions bound violated at t={t}: delta * max tau0 = {delta * tau0:.4f} >= 1"
        )
    dtau = np.array([delta * c.value(t) for c in tau_curves])
    dzeta = np.array([[delta * c.value(t) for c in row] for row in zeta_curves])
    dkappa = np.array([delta * c.value(t) for c in kappa_curves])
    return EmissionsCostRate(dtau, dzeta, dkappa)


@dataclass(frozen=True)
class EnergyPriceModel:
    """Linear pass-through of the carbon price to energy prices, per type.

    coefficients maps an energy type to (f1, f0): price = f1 * delta_t + f0
    in euro/kWh.
    """

    coefficients: dict

    def __post_init__(self):
        for name, (f1, f0) in self.coefficients.items():
            if f1 <= 0.0 or f0 <= 0.0:
                raise ValidationError(f"energy type {name!r} requires f1, f0 > 0")

    def price(self, path, t, energy_type):
        f1, f0 = self.coefficients[energy_type]
        return f1 * path.value(t) + f0


def energy_price(model, path, t, energy_type="electricity"):
    """Energy price at date t for an energy type (euro/kWh)."""
    if np.any(np.asarray(t, dtype=float) < 0.0):
        raise DomainError("energy_price requires t >= 0")
    return model.price(path, t, energy_type)


@dataclass(frozen=True)
class RenovationCostModel:
    """Cost c0 * |x - y|^(1 + c1) of moving efficiency x to y, euro/kWh/m2."""

    c0: float
    c1: float

    def __post_init__(self):
        if self.c0 <= 0.0:
            raise ValidationError("renovation cost scale c0 must be > 0")
        if self.c1 < -1.0:
            raise ValidationError("renovation cost exponent c1 must be >= -1")

    def cost(self, x, y):
        if x == y:
            return 0.0
        return self.c0 * abs(x - y) ** (1.0 + self.c1)


def optimal_renovation_time(
    model, energy, path, alpha_n, alpha_star, rbar, t,
    energy_type="electricity", method="auto",
):
    """First date from t when renovating beats paying the extra energy cost.

    The owner renovates when the energy price reaches the amortised renovation
    cost rbar * cost / (alpha_n - alpha_star). Returns t when the threshold is
    already met, +inf when it never is, and the unique crossing otherwise:
    closed form under the exponential carbon-price example, bracketed
    root-finding for general paths.

    Args:
        method: "auto" (closed form when available), "closed-form", or "root".
    """
    if alpha_n < alpha_star:
        raise DomainError("alpha_n must be >= alpha_star")
    if rbar <= 0.0:
        raise DomainError("discount rate rbar must be > 0")
    if alpha_n == alpha_star:
        return float(t)  # no inefficiency; downstream cost term is identically 0

    threshold = rbar * model.cost(alpha_n, alpha_star) / (alpha_n - alpha_star)
    f_now = energy.price(path, t, energy_type)
    if f_now >= threshold:
        return float(t)
    if energy.price(path, path.t_star, energy_type) < threshold:
        return math.inf

    if method == "closed-form" or (method == "auto" and path.is_exponential):
        if not path.is_exponential:
            raise DomainError("closed form requires an exponential carbon-price path")
        f1, f0 = energy.coefficients[energy_type]
        crossing = path.t_circ + math.log((threshold - f0) / (f1 * path.p0)) / path.eta
    else:
        g = lambda theta: energy.price(path, theta, energy_type) - threshold
        lo = max(float(t), path.t_circ)
        crossing = brentq(g, lo, path.t_star, xtol=1e-12, rtol=1e-15)
    return max(float(crossing), float(t))


@dataclass(frozen=True)
class TransitionScenario:
    """One named transition: price path, intensities, energy and renovation models."""

    name: str
    price_path: CarbonPricePath
    tau: tuple
    zeta: tuple
    kappa: tuple
    energy: EnergyPriceModel
    renovation: RenovationCostModel

    def __post_init__(self):
        n = len(self.tau)
        if len(self.kappa) != n or len(self.zeta) != n or any(len(r) != n for r in self.zeta):
            raise ValidationError("intensity curve blocks must agree on the sector count")

    @property
    def n_sectors(self):
        return len(self.tau)

    def cost_rate(self, t):
        """EmissionsCostRate at date t."""
        return emissions_cost_rate(self.price_path, self.tau, self.zeta, self.kappa, t)

    def validate(self, grid=None):
        """Check the emissions bound on a date grid (default: annual to t_star)."""
        if grid is None:
            grid = np.arange(0.0, self.price_path.t_star + 1.0)
        for t in grid:
            self.cost_rate(float(t))

    def zero_price_twin(self):
        """Same intensities with a zero carbon price (the no-transition baseline)."""
        flat = CarbonPricePath.exponential(
            self.price_path.t_circ, self.price_path.t_star, 0.0, 0.0
        )
        return TransitionScenario(
            name=f"{self.name} (zero price)",
            price_path=flat,
            tau=self.tau,
            zeta=self.zeta,
            kappa=self.kappa,
            energy=self.energy,
            renovation=self.renovation,
        )


def _curve_from_dict(d, t_star):
    return CarbonIntensityCurve(
        y0=float(d["y0"]),
        g0=float(d["g0"]),
        theta=float(d["theta"]),
        t0=float(d.get("t0", 0.0)),
        t_star=t_star,
    )


def scenario_from_dict(d):
    """Build a TransitionScenario from the JSON schema.

    Schema: {name, t_circ, t_star, carbon_price: {P0, eta} | {knots: {t, value}},
    intensities: {tau: [{y0,g0,theta[,t0]} ...], zeta: [[...]], kappa: [...]},
    energy: {type: {f1, f0}, ...}, renovation: {c0, c1}}
    """
    t_circ = float(d["t_circ"])
    t_star = float(d["t_star"])
    cp = d["carbon_price"]
    if "knots" in cp:
        path = CarbonPricePath.from_knots(cp["knots"]["t"], cp["knots"]["value"])
    else:
        path = CarbonPricePath.exponential(t_circ, t_star, float(cp["P0"]), float(cp["eta"]))
    intens = d["intensities"]
    tau = tuple(_curve_from_dict(c, t_star) for c in intens["tau"])
    zeta = tuple(tuple(_curve_from_dict(c, t_star) for c in row) for row in intens["zeta"])
    kappa = tuple(_curve_from_dict(c, t_star) for c in intens["kappa"])
    energy = EnergyPriceModel(
        {name: (float(v["f1"]), float(v["f0"])) for name, v in d["energy"].items()}
    )
    reno = RenovationCostModel(c0=float(d["renovation"]["c0"]), c1=float(d["renovation"]["c1"]))
    return TransitionScenario(
        name=d["name"], price_path=path, tau=tau, zeta=zeta, kappa=kappa,
        energy=energy, renovation=reno,
    )
