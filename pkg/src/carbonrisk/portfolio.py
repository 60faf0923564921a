"""Portfolio loss aggregation and the Monte Carlo risk engine.

The engine evaluates, for each scenario and each date on the evaluation grid,
the projected per-loan default probability, loss given default, and expected
loss in closed form given the simulated systematic state, and estimates the
loss quantile (VaR), unexpected loss, and expected shortfall from inner draws
of the state one horizon ahead, where the conditional portfolio loss is a
deterministic closed-form function of the state.

Randomness is layered in counter-based substreams keyed by path index and
date, never by scenario, so scenarios share common random numbers and results
are bit-identical under any partition of paths across workers.
"""

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .collateral import (
    GaussianPairLaw,
    housing_cross_cov,
    inefficiency_cost,
    lgd_projected,
    productivity_cross_cov,
    validate_financial_asset,
)
from .detmath import batch_dot
from .errors import ValidationError
from .firm import CarbonValueCurve, r_integral, validate_firm
from .numerics import empirical_quantile_rows, normal_cdf, rng_stream
from .economy import state_transition

_OUTER_NS = 1 << 39
_INNER_NS = 1 << 40
_GORDY_NS = 1 << 41
_PD_EPS = 1e-16  # keep spot default probabilities inside (0, 1) for the LGD law


@dataclass(frozen=True)
class LoanSpec:
    """One obligor with its collateral and recovery machinery."""

    firm: object
    collateral: object
    recovery: object


@dataclass(frozen=True)
class Portfolio:
    """The loan book, its sub-portfolio grouping, and the housing index."""

    loans: tuple
    housing_index: object = None

    def __post_init__(self):
        object.__setattr__(self, "loans", tuple(self.loans))
        if len(self.loans) == 0:
            raise ValidationError("portfolio must contain at least one loan")
        needs_index = any(l.collateral.kind == "building" for l in self.loans)
        if needs_index and self.housing_index is None:
            raise ValidationError("building collateral requires a housing index")

    @property
    def n_loans(self):
        return len(self.loans)

    @property
    def has_buildings(self):
        return any(l.collateral.kind == "building" for l in self.loans)

    def groups(self):
        """Disjoint sub-portfolios by group index, covering all loans."""
        out = {}
        for idx, loan in enumerate(self.loans):
            out.setdefault(loan.firm.group, []).append(idx)
        return out

    def granularity_ratio(self, date):
        """max_n EAD_n / sum_n EAD_n at a date; small for fine-grained books."""
        eads = np.array([l.firm.ead.value(date) for l in self.loans])
        return float(eads.max() / eads.sum())

    def validate(self, market):
        for loan in self.loans:
            validate_firm(loan.firm, market)
            if loan.collateral.kind == "financial":
                validate_financial_asset(loan.collateral, market)


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo layout: outer/inner draws, confidence level, horizon, grid."""

    eval_dates: tuple
    horizon: float = 1.0
    n_outer: int = 500
    n_inner: int = 500
    alpha: float = 0.99
    master_seed: int = 0
    workers: int = 1
    em_substeps: int = 64

    def __post_init__(self):
        object.__setattr__(self, "eval_dates", tuple(float(t) for t in self.eval_dates))
        if len(self.eval_dates) == 0 or any(
            b <= a for a, b in zip(self.eval_dates, self.eval_dates[1:])
        ):
            raise ValidationError("eval_dates must be non-empty and increasing")
        if self.n_outer < 1 or self.n_inner < 1 or self.em_substeps < 1:
            raise ValidationError("simulation sizes must be >= 1")
        if not (0.0 < self.alpha < 1.0):
            raise ValidationError("confidence level must lie in (0, 1)")
        if self.horizon <= 0.0:
            raise ValidationError("horizon must be > 0")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.n_inner < 1.0 / (1.0 - self.alpha):
            warnings.warn(
                f"quantile resolution: {self.n_inner} inner draws cannot resolve "
                f"the {self.alpha:.4f} level",
                stacklevel=2,
            )


def conditional_loss(eads, lgds, pds):
    """Systematic-state conditional loss: sum of EAD * LGD * PD."""
    eads = np.asarray(eads, dtype=float)
    lgds = np.asarray(lgds, dtype=float)
    pds = np.asarray(pds, dtype=float)
    return float(np.sum(eads * lgds * pds))


def conditional_loss_by_block(portfolio, eads, lgds, pds):
    """Conditional loss decomposed over the three collateral blocks."""
    kinds = np.array([l.collateral.kind for l in portfolio.loans])
    terms = np.asarray(eads) * np.asarray(lgds) * np.asarray(pds)
    return {
        "none": float(terms[kinds == "none"].sum()),
        "financial": float(terms[kinds == "financial"].sum()),
        "building": float(terms[kinds == "building"].sum()),
        "total": float(terms.sum()),
    }


def realized_loss(eads, recoveries, collateral_values, defaulted):
    """Realized portfolio loss from default indicators and liquidation values.

    loss = sum_n (1-gamma_n) (EAD_n - (1-k_n) e^{-r_n a_n} C_n)+ 1{default_n}.
    """
    total = 0.0
    for ead, rec, c_val, d in zip(eads, recoveries, collateral_values, defaulted):
        if not d:
            continue
        disc = (1.0 - rec.k) * math.exp(-rec.r * rec.delay)
        total += (1.0 - rec.gamma) * max(ead - disc * c_val, 0.0)
    return total


# ---------------------------------------------------------------------------
# Per-scenario deterministic tables
# ---------------------------------------------------------------------------


@dataclass
class _LoanTables:
    """Deterministic per-loan inputs, arrays indexed by evaluation date."""

    ead_fwd: np.ndarray          # EAD(date + T)
    debt_fwd: np.ndarray         # debt barrier at date + T
    log_f0_rint_fwd: np.ndarray  # log(F0 R(date + T))
    var1_proj: np.ndarray        # projected log-value variance L(t, T)
    var1_spot: np.ndarray        # spot log-value variance (t + T) sigma^2
    kw_drift: float              # a . mu T
    kw_z: np.ndarray             # varsigma Ups_T^T a
    a_loadings: np.ndarray
    # financial collateral pieces (None when not applicable)
    fin_loadings: np.ndarray = None
    fin_log_rbar_fwd: np.ndarray = None  # log(share Fbar0 Rbar(date + T + a))
    fin_kw_drift: float = 0.0            # abar . mu (T + a)
    fin_kw_z: np.ndarray = None          # varsigma Ups_{T+a}^T abar
    fin_var2: np.ndarray = None          # Lbar(t, T + a)
    fin_cov: float = 0.0
    fin_spot_drift: float = 0.0          # abar . mu a
    fin_spot_kw_z: np.ndarray = None     # varsigma Ups_a^T abar
    fin_spot_var2: np.ndarray = None     # Lbar(t + T, a)
    # building pieces
    bld_x_fwd: np.ndarray = None         # X(date + T + a)
    bld_m2_base: np.ndarray = None       # deterministic index-mean part at t, T + a
    bld_var2: np.ndarray = None          # v(t, T + a)
    bld_cov: float = 0.0
    bld_h_scale: float = 0.0             # sigma_idx e^{-nu (T + a)}
    bld_spot_var2: np.ndarray = None     # v(t + T, a)
    bld_spot_h_scale: float = 0.0        # sigma_idx e^{-nu a}


def _housing_var(index, t, horizon):
    nu, sig = index.nu, index.sigma
    rho2 = float(index.rho @ index.rho)
    return (sig**2) * rho2 / (2.0 * nu) * (1.0 - math.exp(-2.0 * nu * horizon)) + (
        sig**2
    ) * (1.0 - rho2) / (2.0 * nu) * (1.0 - math.exp(-2.0 * nu * (t + horizon)))


def _build_tables(portfolio, market, scenario, config):
    """All deterministic per-(loan, date) quantities for one scenario."""
    prod = market.productivity
    vcurve = CarbonValueCurve(market.elasticities, scenario)
    v0 = vcurve(market.epoch)
    dates = np.asarray(config.eval_dates)
    T = config.horizon
    ts_model = dates - market.epoch
    if np.any(ts_model < 0.0):
        raise ValidationError("evaluation dates precede the model epoch")
    index = portfolio.housing_index

    cov_aa_T = prod.noise_covariances(T)["aa"]
    ups_T = prod.upsilon(T)
    tables = []
    for loan in portfolio.loans:
        firm = loan.firm
        rec = loan.recovery
        a = firm.loadings
        delay = rec.delay
        rint_fwd = np.array(
            [r_integral(a, firm.sigma, market, vcurve, d + T) for d in dates]
        )
        tab = _LoanTables(
            ead_fwd=np.atleast_1d(firm.ead.value(dates + T)),
            debt_fwd=np.atleast_1d(firm.debt.value(dates + T)),
            log_f0_rint_fwd=np.log(firm.f0 * rint_fwd),
            var1_proj=float(a @ cov_aa_T @ a) + (ts_model + T) * firm.sigma**2,
            var1_spot=(ts_model + T) * firm.sigma**2,
            kw_drift=float(a @ prod.mu) * T,
            kw_z=prod.varsigma * (ups_T.T @ a),
            a_loadings=a,
        )
        col = loan.collateral
        if col.kind == "financial":
            abar = col.loadings
            ha = T + delay
            rbar_fwd = np.array(
                [
                    r_integral(abar, col.sigma, market, vcurve, d + T + delay)
                    for d in dates
                ]
            )
            tab.fin_loadings = abar
            tab.fin_log_rbar_fwd = np.log(col.share * col.fbar0 * rbar_fwd)
            tab.fin_kw_drift = float(abar @ prod.mu) * ha
            tab.fin_kw_z = prod.varsigma * (prod.upsilon(ha).T @ abar)
            tab.fin_var2 = (
                float(abar @ prod.noise_covariances(ha)["aa"] @ abar)
                + (ts_model + ha) * col.sigma**2
            )
            tab.fin_cov = productivity_cross_cov(prod, a, abar, T, delay)
            tab.fin_spot_drift = float(abar @ prod.mu) * delay
            tab.fin_spot_kw_z = prod.varsigma * (prod.upsilon(delay).T @ abar)
            tab.fin_spot_var2 = (
                float(abar @ prod.noise_covariances(delay)["aa"] @ abar)
                + (ts_model + ha) * col.sigma**2
            )
        elif col.kind == "building":
            ha = T + delay
            log_twin = math.log(col.surface * col.price_sqm)
            tab.bld_x_fwd = np.array(
                [
                    inefficiency_cost(col, scenario, rec.rbar, d + T + delay)
                    for d in dates
                ]
            )
            tab.bld_m2_base = (
                log_twin
                + index.chi(ts_model + ha)
                - (index.chi(0.0) - index.k0) * np.exp(-index.nu * (ts_model + ha))
            )
            tab.bld_var2 = np.array([_housing_var(index, t, ha) for t in ts_model])
            tab.bld_cov = housing_cross_cov(prod, a, index, T, delay)
            tab.bld_h_scale = index.sigma * math.exp(-index.nu * ha)
            tab.bld_spot_var2 = np.array(
                [_housing_var(index, t + T, delay) for t in ts_model]
            )
            tab.bld_spot_h_scale = index.sigma * math.exp(-index.nu * delay)
        tables.append(tab)
    return tables, vcurve, v0


# ---------------------------------------------------------------------------
# Vectorized loan measures over batches of systematic states
# ---------------------------------------------------------------------------


def _loan_measures(tab, loan, index, di, z, a_circ, h_idx, v0, spot):
    """(pd_raw, lgd) arrays for one loan over a batch of states at date index di.

    spot=False evaluates the projected measures at (date, T); spot=True the
    date+T spot measures used inside the loss quantile, where the projected
    horizon collapses to the liquidation delay and the obligor/collateral
    cross term vanishes.
    """
    col = loan.collateral
    rec = loan.recovery
    carried = batch_dot(a_circ - v0[None, :], tab.a_loadings)
    if spot:
        mean1 = tab.log_f0_rint_fwd[di] + carried
        var1 = tab.var1_spot[di]
    else:
        mean1 = tab.log_f0_rint_fwd[di] + tab.kw_drift + batch_dot(z, tab.kw_z) + carried
        var1 = tab.var1_proj[di]
    pd_raw = normal_cdf((math.log(tab.debt_fwd[di]) - mean1) / math.sqrt(var1))
    pd = np.clip(pd_raw, _PD_EPS, 1.0 - _PD_EPS)
    ead = tab.ead_fwd[di]
    if col.kind == "none":
        return pd_raw, np.full_like(pd, 1.0 - rec.gamma)
    if col.kind == "financial":
        carried2 = batch_dot(a_circ - v0[None, :], tab.fin_loadings)
        if spot:
            mean2 = (
                tab.fin_log_rbar_fwd[di]
                + tab.fin_spot_drift
                + batch_dot(z, tab.fin_spot_kw_z)
                + carried2
            )
            var2, cov = tab.fin_spot_var2[di], 0.0
        else:
            mean2 = (
                tab.fin_log_rbar_fwd[di]
                + tab.fin_kw_drift
                + batch_dot(z, tab.fin_kw_z)
                + carried2
            )
            var2, cov = tab.fin_var2[di], tab.fin_cov
        pair = GaussianPairLaw(mean1=mean1, mean2=mean2, var1=var1, var2=var2, cov=cov)
        return pd_raw, lgd_projected(col, rec, ead, pair, pd)
    # building
    h_term = batch_dot(h_idx, index.rho)
    if spot:
        mean2 = tab.bld_m2_base[di] + tab.bld_spot_h_scale * h_term
        var2, cov = tab.bld_spot_var2[di], 0.0
    else:
        mean2 = tab.bld_m2_base[di] + tab.bld_h_scale * h_term
        var2, cov = tab.bld_var2[di], tab.bld_cov
    pair = GaussianPairLaw(mean1=mean1, mean2=mean2, var1=var1, var2=var2, cov=cov)
    return pd_raw, lgd_projected(
        col, rec, ead, pair, pd, inefficiency=tab.bld_x_fwd[di]
    )


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioRiskResult:
    """Per-scenario result arrays, indexed by (date, loan) or (date,)."""

    scenario: str
    eval_dates: tuple
    horizon: float
    alpha: float
    loan_ids: tuple
    loan_pd: np.ndarray
    loan_lgd: np.ndarray
    loan_el: np.ndarray
    loan_var: np.ndarray
    loan_ul: np.ndarray
    loan_es: np.ndarray
    el: np.ndarray
    el_se: np.ndarray
    el_inner: np.ndarray
    var: np.ndarray
    var_se: np.ndarray
    ul: np.ndarray
    es: np.ndarray
    es_se: np.ndarray
    granularity: np.ndarray


def _simulate_outer_states(portfolio, market, config, init_state=None):
    """Exact sequential sampling of (Z, A, h) along the evaluation grid.

    Path p draws its per-interval innovations from stream (seed, outer ns + p),
    so the outer panel is independent of any worker partitioning. The state at
    the first evaluation date is the known current state.
    """
    prod = market.productivity
    n = prod.n_sectors
    decay = portfolio.housing_index.nu if portfolio.has_buildings else None
    dim = 3 * n if decay is not None else 2 * n
    dates = config.eval_dates
    n_dates = len(dates)
    d_outer = config.n_outer

    if init_state is None:
        z0, a0, h0 = np.zeros(n), np.zeros(n), np.zeros(n)
    else:
        z0, a0 = init_state.z, init_state.a_circ
        h0 = init_state.h_housing if init_state.h_housing is not None else np.zeros(n)

    steps = [
        state_transition(prod, dates[k + 1] - dates[k], housing_decay=decay)
        for k in range(n_dates - 1)
    ]
    z = np.empty((d_outer, n_dates, n))
    a = np.empty((d_outer, n_dates, n))
    h = np.empty((d_outer, n_dates, n))
    z[:, 0] = z0
    a[:, 0] = a0
    h[:, 0] = h0
    if n_dates > 1:
        noise = np.empty((d_outer, n_dates - 1, dim))
        for p in range(d_outer):
            noise[p] = rng_stream(config.master_seed, _OUTER_NS + p).standard_normal(
                (n_dates - 1, dim)
            )
        zc, ac, hc = z[:, 0].copy(), a[:, 0].copy(), h[:, 0].copy()
        for k, tr in enumerate(steps):
            if decay is None:
                zc, ac, _ = tr.sample(zc, ac, None, noise[:, k])
            else:
                zc, ac, hc = tr.sample(zc, ac, hc, noise[:, k])
            z[:, k + 1] = zc
            a[:, k + 1] = ac
            h[:, k + 1] = hc
    return z, a, h


def _tail_mean_rows(x, thresholds):
    """Row-wise mean of the entries at or above the row threshold."""
    mask = x >= thresholds[:, None]
    return np.sum(x * mask, axis=1) / np.maximum(mask.sum(axis=1), 1)


def _run_outer_range(ctx, lo, hi):
    """Risk measures for outer paths [lo, hi): the worker unit of parallelism.

    All state math is vectorized with shape-stable kernels, so the numbers a
    path produces are identical regardless of the range it lands in.
    """
    (portfolio, market, config, tables, v0, outer, inner_tr, decay) = ctx
    z_outer, a_outer, h_outer = outer
    n = market.n_sectors
    n_dates = len(config.eval_dates)
    n_loans = portfolio.n_loans
    m = hi - lo
    index = portfolio.housing_index

    loan_pd = np.empty((m, n_dates, n_loans))
    loan_lgd = np.empty((m, n_dates, n_loans))
    loan_el = np.empty((m, n_dates, n_loans))
    loan_var = np.empty((m, n_dates, n_loans))
    loan_ul = np.empty((m, n_dates, n_loans))
    loan_es = np.empty((m, n_dates, n_loans))
    pf_el = np.empty((m, n_dates))
    pf_var = np.empty((m, n_dates))
    pf_es = np.empty((m, n_dates))
    pf_el_inner = np.empty((m, n_dates))

    dim = 3 * n if decay is not None else 2 * n
    d_inner = config.n_inner
    for di in range(n_dates):
        z_b = z_outer[lo:hi, di]
        a_b = a_outer[lo:hi, di]
        h_b = h_outer[lo:hi, di]
        # projected measures, closed form given the outer state
        for li, loan in enumerate(portfolio.loans):
            pd_b, lgd_b = _loan_measures(
                tables[li], loan, index, di, z_b, a_b, h_b, v0, spot=False
            )
            loan_pd[:, di, li] = pd_b
            loan_lgd[:, di, li] = lgd_b
            loan_el[:, di, li] = tables[li].ead_fwd[di] * lgd_b * pd_b
        pf_el[:, di] = loan_el[:, di].sum(axis=1)

        # inner draws of the state at date + T given each outer state
        noise = np.empty((m, d_inner, dim))
        for p in range(lo, hi):
            noise[p - lo] = rng_stream(
                config.master_seed, _INNER_NS + (di << 25) + p
            ).standard_normal((d_inner, dim))
        noise = noise.reshape(m * d_inner, dim)
        z_in, a_in, h_in = inner_tr.sample(
            np.repeat(z_b, d_inner, axis=0),
            np.repeat(a_b, d_inner, axis=0),
            np.repeat(h_b, d_inner, axis=0) if decay is not None else None,
            noise,
        )
        if h_in is None:
            h_in = np.zeros((m * d_inner, n))
        losses = np.empty((m * d_inner, n_loans))
        for li, loan in enumerate(portfolio.loans):
            pd_b, lgd_b = _loan_measures(
                tables[li], loan, index, di, z_in, a_in, h_in, v0, spot=True
            )
            losses[:, li] = tables[li].ead_fwd[di] * lgd_b * pd_b
        losses = losses.reshape(m, d_inner, n_loans)
        total = losses.sum(axis=2)
        pf_el_inner[:, di] = total.mean(axis=1)
        var_rows = empirical_quantile_rows(total, config.alpha)
        pf_var[:, di] = var_rows
        pf_es[:, di] = _tail_mean_rows(total, var_rows)
        for li in range(n_loans):
            col = losses[:, :, li]
            v_rows = empirical_quantile_rows(col, config.alpha)
            loan_var[:, di, li] = v_rows
            loan_ul[:, di, li] = v_rows - loan_el[:, di, li]
            loan_es[:, di, li] = _tail_mean_rows(col, v_rows)
    return {
        "loan_pd": loan_pd, "loan_lgd": loan_lgd, "loan_el": loan_el,
        "loan_var": loan_var, "loan_ul": loan_ul, "loan_es": loan_es,
        "pf_el": pf_el, "pf_var": pf_var, "pf_es": pf_es,
        "pf_el_inner": pf_el_inner,
    }


def _worker_entry(args):
    return _run_outer_range(*args)


def run_scenario_risk(portfolio, market, scenario, config, init_state=None):
    """EL, VaR, UL, ES and per-loan measures for one scenario on the date grid.

    Outer paths carry the systematic state along the evaluation dates; for
    each date, inner draws of the state one horizon ahead price the loss
    quantile. Reported numbers are averages over outer paths, with standard
    errors across them. Results are bit-identical for any worker count.
    """
    portfolio.validate(market)
    tables, _, v0 = _build_tables(portfolio, market, scenario, config)
    decay = portfolio.housing_index.nu if portfolio.has_buildings else None
    outer = _simulate_outer_states(portfolio, market, config, init_state)
    inner_tr = state_transition(market.productivity, config.horizon, housing_decay=decay)
    ctx = (portfolio, market, config, tables, v0, outer, inner_tr, decay)

    d_outer = config.n_outer
    if config.workers == 1 or d_outer < 2 * config.workers:
        parts = [_run_outer_range(ctx, 0, d_outer)]
    else:
        bounds = np.linspace(0, d_outer, config.workers + 1).astype(int)
        jobs = [(ctx, int(lo), int(hi)) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_worker_entry, jobs))

    merged = {
        key: np.concatenate([p[key] for p in parts], axis=0) for key in parts[0]
    }
    n_dates = len(config.eval_dates)
    sqrt_d = math.sqrt(d_outer)
    gran = np.array([portfolio.granularity_ratio(d) for d in config.eval_dates])
    return ScenarioRiskResult(
        scenario=scenario.name,
        eval_dates=config.eval_dates,
        horizon=config.horizon,
        alpha=config.alpha,
        loan_ids=tuple(l.firm.loan_id for l in portfolio.loans),
        loan_pd=merged["loan_pd"].mean(axis=0),
        loan_lgd=merged["loan_lgd"].mean(axis=0),
        loan_el=merged["loan_el"].mean(axis=0),
        loan_var=merged["loan_var"].mean(axis=0),
        loan_ul=merged["loan_ul"].mean(axis=0),
        loan_es=merged["loan_es"].mean(axis=0),
        el=merged["pf_el"].mean(axis=0),
        el_se=merged["pf_el"].std(axis=0, ddof=1) / sqrt_d if d_outer > 1 else np.zeros(n_dates),
        el_inner=merged["pf_el_inner"].mean(axis=0),
        var=merged["pf_var"].mean(axis=0),
        var_se=merged["pf_var"].std(axis=0, ddof=1) / sqrt_d if d_outer > 1 else np.zeros(n_dates),
        ul=(merged["pf_var"] - merged["pf_el"]).mean(axis=0),
        es=merged["pf_es"].mean(axis=0),
        es_se=merged["pf_es"].std(axis=0, ddof=1) / sqrt_d if d_outer > 1 else np.zeros(n_dates),
        granularity=gran,
    )


def expected_loss(portfolio, market, scenario, config, state):
    """Closed-form conditional expected loss at one known systematic state.

    The state must sit on the first evaluation date; this is the zero-outer-
    noise specialisation used for spot reporting and tests.
    """
    tables, _, v0 = _build_tables(portfolio, market, scenario, config)
    index = portfolio.housing_index
    n = market.n_sectors
    z = state.z[None, :]
    a = state.a_circ[None, :]
    h = (state.h_housing if state.h_housing is not None else np.zeros(n))[None, :]
    total = 0.0
    per_loan = []
    for li, loan in enumerate(portfolio.loans):
        pd_b, lgd_b = _loan_measures(tables[li], loan, index, 0, z, a, h, v0, spot=False)
        contrib = tables[li].ead_fwd[0] * lgd_b[0] * pd_b[0]
        per_loan.append((pd_b[0], lgd_b[0], contrib))
        total += contrib
    return total, per_loan


def gordy_convergence_check(template, market, scenario, date, n_grid, n_paths=400, seed=0):
    """Deviation of the realized loss from its conditional expectation per N.

    Builds homogeneous portfolios of N copies of the template loan, simulates
    the systematic state at the evaluation date and the idiosyncratic noises
    per loan, and reports the standard deviation across paths of
    (L_N - conditional loss) / total EAD for each N. Expected N^{-1/2} decay.
    """
    # anchor the table's forward column exactly on the evaluation date; the
    # quantile fields of this internal config are never used
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        config = SimulationConfig(
            eval_dates=(date - 1.0,), horizon=1.0, n_outer=1, n_inner=1,
            master_seed=seed, alpha=0.5,
        )
    single = Portfolio(loans=(template,), housing_index=None)
    tables, _, v0 = _build_tables(single, market, scenario, config)
    tab = tables[0]
    rec = template.recovery
    col = template.collateral
    prod = market.productivity
    t_model = date - market.epoch

    # law of the state at the evaluation date seen from the epoch state
    tr = state_transition(prod, t_model) if t_model > 0 else None
    out = {}
    for grid_idx, n_loans in enumerate(n_grid):
        rng_sys = rng_stream(seed, _GORDY_NS + grid_idx)
        devs = np.empty(n_paths)
        for p in range(n_paths):
            if tr is None:
                z = np.zeros((1, prod.n_sectors))
                a = np.zeros((1, prod.n_sectors))
            else:
                noise = rng_sys.standard_normal((1, 2 * prod.n_sectors))
                z, a, _ = tr.sample(
                    np.zeros((1, prod.n_sectors)), np.zeros((1, prod.n_sectors)), None, noise
                )
            pd_b, lgd_b = _loan_measures(
                tab, template, None, 0, z, a, np.zeros((1, prod.n_sectors)), v0,
                spot=True,
            )
            ead = tab.ead_fwd[0]
            cond = n_loans * ead * lgd_b[0] * pd_b[0]
            # realized idiosyncratic outcomes
            mean1 = tab.log_f0_rint_fwd[0] + batch_dot(a - v0[None, :], tab.a_loadings)
            eps = rng_sys.standard_normal(n_loans)
            log_v = mean1[0] + math.sqrt(tab.var1_spot[0]) * eps
            defaulted = log_v < math.log(tab.debt_fwd[0])
            if col.kind == "none":
                loss_each = (1.0 - rec.gamma) * ead * defaulted
            elif col.kind == "financial":
                mean2 = (
                    tab.fin_log_rbar_fwd[0]
                    + tab.fin_spot_drift
                    + batch_dot(z, tab.fin_spot_kw_z)
                    + batch_dot(a - v0[None, :], tab.fin_loadings)
                )[0]
                eps2 = rng_sys.standard_normal(n_loans)
                c_val = np.exp(mean2 + math.sqrt(tab.fin_spot_var2[0]) * eps2)
                disc = (1.0 - rec.k) * math.exp(-rec.r * rec.delay)
                loss_each = (
                    (1.0 - rec.gamma) * np.maximum(ead - disc * c_val, 0.0) * defaulted
                )
            else:
                raise ValidationError("gordy check supports unsecured or financial templates")
            devs[p] = (loss_each.sum() - cond) / (n_loans * ead)
        out[int(n_loans)] = float(devs.std(ddof=1))
    return out
