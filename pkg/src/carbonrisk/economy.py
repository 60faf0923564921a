"""Multisector economy: OU productivity, equilibrium maps, output and consumption.

Matrix conventions. The elasticity matrix is stored row-major by producing
sector: lam[i, j] is the elasticity of input j in sector i's production, and
psi[i] the labor elasticity, with constant returns psi[i] + sum_j lam[i, j] = 1.
The carbon-adjusted input matrix Lam follows the same layout, so the
output-to-consumption multiplier solves (I - Lam^T) e = 1 and log-consumption
solves (I - lam) log C = A + consumption_shifter.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .detmath import batch_mat
from .errors import DomainError, EquilibriumError, OracleError, ValidationError
from .numerics import QuadratureSpec, integrate, matrix_exponential, rng_stream, spectral_report
from .scenario import EmissionsCostRate

_COV_QUAD = QuadratureSpec(abs_tol=1e-12, max_subdivisions=40_000)


@dataclass(frozen=True)
class Elasticities:
    """Production elasticities and the Frisch labor parameter."""

    psi: np.ndarray
    lam: np.ndarray
    phi: float = 1.0

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "lam", lam)
        n = psi.shape[0]
        if lam.shape != (n, n):
            raise ValidationError("elasticity matrix must be square and match psi")
        if np.any(psi <= 0.0) or np.any(lam <= 0.0):
            raise ValidationError("elasticities must be strictly positive")
        if self.phi < 0.0:
            raise ValidationError("Frisch parameter must be >= 0")
        if np.max(np.abs(psi + lam.sum(axis=1) - 1.0)) > 1e-10:
            raise ValidationError("constant returns violated: psi_i + sum_j lam_ij != 1")
        if abs(np.linalg.det(np.eye(n) - lam)) < 1e-14:
            raise ValidationError("I - lam is singular")

    @property
    def n_sectors(self):
        return self.psi.shape[0]


@dataclass(frozen=True)
class ProductivityParams:
    """OU parameters of the log-productivity growth process.

    dZ = -gamma Z dt + sigma dB, dA = (mu + varsigma Z) dt. -gamma must be
    Hurwitz and sigma positive definite. z0_cov defaults to the stationary
    covariance of Z.
    """

    mu: np.ndarray
    gamma: np.ndarray
    sigma: np.ndarray
    varsigma: float = 1.0
    z0_cov: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "sigma", sigma)
        n = mu.shape[0]
        if gamma.shape != (n, n) or sigma.shape != (n, n):
            raise ValidationError("gamma and sigma must be square and match mu")
        if not (0.0 < self.varsigma <= 1.0):
            raise ValidationError("noise intensity varsigma must lie in (0, 1]")
        report = spectral_report(gamma)
        if not report.is_hurwitz:
            raise ValidationError(
                "-gamma is not Hurwitz: eigenvalue real parts "
                f"{np.sort(report.eigen_real_parts)}"
            )
        object.__setattr__(self, "_spectral", report)
        try:
            np.linalg.cholesky(sigma @ sigma.T)
        except np.linalg.LinAlgError:
            raise ValidationError("sigma must be nonsingular (sigma sigma^T pos. def.)")
        if self.z0_cov is None:
            object.__setattr__(self, "z0_cov", stationary_covariance(gamma, sigma))
        else:
            object.__setattr__(self, "z0_cov", np.asarray(self.z0_cov, dtype=float))

    @property
    def n_sectors(self):
        return self.mu.shape[0]

    @property
    def spectral(self):
        return self._spectral

    def expm_gamma(self, h):
        """e^{-gamma h}, cached per horizon."""
        key = ("expm", float(h))
        if key not in self._cache:
            self._cache[key] = matrix_exponential(-self.gamma * float(h))
        return self._cache[key]

    def upsilon(self, h):
        """gamma^{-1} (I - e^{-gamma h}), the integrated decay factor."""
        key = ("ups", float(h))
        if key not in self._cache:
            n = self.n_sectors
            self._cache[key] = np.linalg.solve(self.gamma, np.eye(n) - self.expm_gamma(h))
        return self._cache[key]

    def noise_covariances(self, h, housing_decay=None):
        """Covariance blocks of the (Z, A, h) innovations over a horizon h.

        Returns a dict with keys 'zz', 'aa', 'za' and, when housing_decay nu
        is given, 'zh', 'ah', 'hh'. All integrals are quadrature of matrix
        exponential products; 'hh' is closed form.
        """
        nu = None if housing_decay is None else float(housing_decay)
        key = ("cov", float(h), nu)
        if key in self._cache:
            return self._cache[key]
        n = self.n_sectors
        h = float(h)
        if h < 0.0:
            raise DomainError("horizon must be >= 0")
        ss = self.sigma @ self.sigma.T
        vs = self.varsigma
        eye = np.eye(n)
        if h == 0.0:
            blocks = {"zz": np.zeros((n, n)), "aa": np.zeros((n, n)), "za": np.zeros((n, n))}
            if nu is not None:
                blocks.update(zh=np.zeros((n, n)), ah=np.zeros((n, n)), hh=np.zeros((n, n)))
            self._cache[key] = blocks
            return blocks

        g_inv_t = np.linalg.inv(self.gamma).T

        if nu is None:
            def f(u):
                e = matrix_exponential(-self.gamma * u)
                zz = e @ ss @ e.T
                za = e @ ss @ (eye - e).T
                d = eye - e
                aa = d @ ss @ d.T
                return np.stack([zz, za, aa])

            stacked = integrate(f, 0.0, h, _COV_QUAD)
            g_inv = np.linalg.inv(self.gamma)
            blocks = {
                "zz": stacked[0],
                "za": vs * stacked[1] @ g_inv_t,
                "aa": vs * vs * g_inv @ stacked[2] @ g_inv_t,
            }
        else:
            def f(u):
                e = matrix_exponential(-self.gamma * u)
                d = eye - e
                en = np.exp(-nu * u)
                zz = e @ ss @ e.T
                za = e @ ss @ d.T
                aa = d @ ss @ d.T
                zh = en * (e @ self.sigma)
                ah = en * (d @ self.sigma)
                return np.stack([zz, za, aa, zh, ah])

            stacked = integrate(f, 0.0, h, _COV_QUAD)
            g_inv = np.linalg.inv(self.gamma)
            blocks = {
                "zz": stacked[0],
                "za": vs * stacked[1] @ g_inv_t,
                "aa": vs * vs * g_inv @ stacked[2] @ g_inv_t,
                "zh": stacked[3],
                "ah": vs * g_inv @ stacked[4],
                "hh": (1.0 - np.exp(-2.0 * nu * h)) / (2.0 * nu) * eye,
            }
        self._cache[key] = blocks
        return blocks


def stationary_covariance(gamma, sigma):
    """Stationary covariance of Z: the solution of gamma V + V gamma^T = sigma sigma^T."""
    gamma = np.asarray(gamma, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return scipy.linalg.solve_continuous_lyapunov(-gamma, -(sigma @ sigma.T))


@dataclass(frozen=True)
class ProductivityState:
    """Current value of the productivity pair (and housing noise integral)."""

    t: float
    z: np.ndarray
    a_circ: np.ndarray
    h_housing: np.ndarray = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        a = np.asarray(self.a_circ, dtype=float)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "a_circ", a)
        if self.h_housing is not None:
            object.__setattr__(self, "h_housing", np.asarray(self.h_housing, dtype=float))
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(a))):
            raise ValidationError("productivity state must be finite")

    @classmethod
    def initial(cls, n_sectors, t=0.0):
        return cls(t, np.zeros(n_sectors), np.zeros(n_sectors), np.zeros(n_sectors))


@dataclass(frozen=True)
class OUConditionalLaw:
    """Gaussian law of (Z_{t+h}, A_{t+h}) given the time-t state."""

    mean_z: np.ndarray
    mean_a: np.ndarray
    cov_zz: np.ndarray
    cov_za: np.ndarray
    cov_aa: np.ndarray

    def joint(self):
        mean = np.concatenate([self.mean_z, self.mean_a])
        top = np.hstack([self.cov_zz, self.cov_za])
        bottom = np.hstack([self.cov_za.T, self.cov_aa])
        return mean, np.vstack([top, bottom])


def ou_conditional_law(params, state, h):
    """Conditional law of (Z, A) a horizon h ahead of the given state.

    h = 0 gives a point mass at the current state.
    """
    if h < 0.0:
        raise DomainError("horizon must be >= 0")
    e = params.expm_gamma(h)
    ups = params.upsilon(h)
    mean_z = e @ state.z
    mean_a = state.a_circ + params.mu * h + params.varsigma * ups @ state.z
    cov = params.noise_covariances(h)
    return OUConditionalLaw(mean_z, mean_a, cov["zz"], cov["za"], cov["aa"])


def unconditional_state_law(params, t):
    """Law of (Z_t, A_t - A_0) when Z_0 is drawn from its initial covariance."""
    if t < 0.0:
        raise DomainError("t must be >= 0")
    n = params.n_sectors
    e = params.expm_gamma(t)
    ups = params.upsilon(t)
    v0 = params.z0_cov
    vs = params.varsigma
    cov = params.noise_covariances(t)
    return OUConditionalLaw(
        mean_z=np.zeros(n),
        mean_a=params.mu * t,
        cov_zz=e @ v0 @ e.T + cov["zz"],
        cov_za=e @ v0 @ (vs * ups).T + cov["za"],
        cov_aa=(vs * ups) @ v0 @ (vs * ups).T + cov["aa"],
    )


@dataclass(frozen=True)
class StateTransition:
    """Exact sampler of (Z, A, h) over one horizon, shared across paths.

    The housing block h_t = int_0^t e^{-nu (t-s)} dB_s is carried only when a
    housing decay rate was supplied.
    """

    h: float
    e_gamma: np.ndarray
    upsilon: np.ndarray
    mu: np.ndarray
    varsigma: float
    housing_decay: float
    chol: np.ndarray
    n: int

    def sample(self, z, a, h_housing, normals):
        """Advance (z, a, h) arrays of shape (paths, I) with standard normals.

        normals must have shape (paths, 3I) (or (paths, 2I) without housing).
        Uses shape-stable kernels so results do not depend on the batch size.
        """
        noise = batch_mat(normals, self.chol)
        z_new = batch_mat(z, self.e_gamma) + noise[:, : self.n]
        a_new = a + self.mu + self.varsigma * batch_mat(z, self.upsilon) + noise[:, self.n: 2 * self.n]
        if self.housing_decay is None:
            return z_new, a_new, None
        decay = np.exp(-self.housing_decay * self.h)
        h_new = decay * h_housing + noise[:, 2 * self.n:]
        return z_new, a_new, h_new


def state_transition(params, h, housing_decay=None):
    """Build the exact one-step sampler for a horizon h."""
    n = params.n_sectors
    cov = params.noise_covariances(h, housing_decay)
    if housing_decay is None:
        full = np.block([[cov["zz"], cov["za"]], [cov["za"].T, cov["aa"]]])
    else:
        full = np.block(
            [
                [cov["zz"], cov["za"], cov["zh"]],
                [cov["za"].T, cov["aa"], cov["ah"]],
                [cov["zh"].T, cov["ah"].T, cov["hh"]],
            ]
        )
    # guard the Cholesky against zero modes (h = 0, or varsigma-degenerate)
    jitter = 1e-14 * max(np.max(np.abs(full)), 1.0)
    chol = np.linalg.cholesky(full + jitter * np.eye(full.shape[0]))
    return StateTransition(
        h=float(h),
        e_gamma=params.expm_gamma(h),
        upsilon=params.upsilon(h),
        mu=params.mu * float(h),
        varsigma=params.varsigma,
        housing_decay=housing_decay,
        chol=chol,
        n=n,
    )


@dataclass(frozen=True)
class SimulatedPaths:
    """Euler-Maruyama trajectories on a grid: arrays of shape (paths, dates, I)."""

    t_grid: np.ndarray
    z: np.ndarray
    a_circ: np.ndarray
    h_housing: np.ndarray = None


def simulate_paths(
    params, t_grid, n_paths, seed, substeps=64, housing_decay=None,
    z0=None, stream_offset=0, block=20_000,
):
    """Euler-Maruyama simulation of (Z, A) with per-path random substreams.

    Z uses the Euler scheme on substeps of each grid interval, A accumulates
    the drift integral by the trapezoid rule, and the housing noise integral
    (when requested) shares the same Brownian increments. Path p draws from
    stream (seed, stream_offset + p), so results do not depend on how paths
    are partitioned across workers.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0.0):
        raise DomainError("t_grid must be strictly increasing with >= 2 points")
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    n = params.n_sectors
    n_dates = t_grid.size
    z0 = np.zeros(n) if z0 is None else np.asarray(z0, dtype=float)

    z_out = np.empty((n_paths, n_dates, n))
    a_out = np.empty((n_paths, n_dates, n))
    h_out = np.empty((n_paths, n_dates, n)) if housing_decay is not None else None
    total_sub = substeps * (n_dates - 1)

    for lo in range(0, n_paths, block):
        hi = min(lo + block, n_paths)
        m = hi - lo
        noise = np.empty((m, total_sub, n))
        for p in range(lo, hi):
            noise[p - lo] = rng_stream(seed, stream_offset + p).standard_normal(
                (total_sub, n)
            )
        z = np.tile(z0, (m, 1))
        a = np.zeros((m, n))
        hh = np.zeros((m, n))
        z_out[lo:hi, 0] = z
        a_out[lo:hi, 0] = a
        if h_out is not None:
            h_out[lo:hi, 0] = hh
        step = 0
        for k in range(n_dates - 1):
            dt = (t_grid[k + 1] - t_grid[k]) / substeps
            sq = np.sqrt(dt)
            for _ in range(substeps):
                dw = sq * noise[:, step, :]
                z_new = z - dt * batch_mat(z, params.gamma) + batch_mat(dw, params.sigma)
                a = a + dt * (params.mu + 0.5 * params.varsigma * (z + z_new))
                if h_out is not None:
                    hh = hh - dt * housing_decay * hh + dw
                z = z_new
                step += 1
            z_out[lo:hi, k + 1] = z
            a_out[lo:hi, k + 1] = a
            if h_out is not None:
                h_out[lo:hi, k + 1] = hh
    return SimulatedPaths(t_grid, z_out, a_out, h_out)


@dataclass(frozen=True)
class EquilibriumMaps:
    """Carbon-adjusted elasticities and the derived equilibrium quantities.

    consumption_shifter is the carbon-cost term of log consumption; the
    log-output shifter adds (I - lam) log(output_ratio) on top of it.
    """

    psi_adj: np.ndarray
    lam_adj: np.ndarray
    output_ratio: np.ndarray
    consumption_shifter: np.ndarray
    output_shifter: np.ndarray


def equilibrium_maps(elasticities, d):
    """Equilibrium maps at one emissions-cost rate.

    Raises:
        EquilibriumError: when the adjusted input matrix makes I - Lam^T
            singular or a carbon wedge exhausts output value (1 - dtau <= 0).
    """
    psi, lam, phi = elasticities.psi, elasticities.lam, elasticities.phi
    n = elasticities.n_sectors
    if isinstance(d, (int, float)) and d == 0:
        d = EmissionsCostRate.zero(n)
    one_minus_tau = 1.0 - d.dtau
    if np.any(one_minus_tau <= 0.0):
        raise EquilibriumError("carbon cost rate on output reaches 100% of value")
    one_plus_kappa = 1.0 + d.dkappa
    psi_adj = psi * one_minus_tau / one_plus_kappa
    lam_adj = (
        lam
        * (one_minus_tau / (1.0 + d.dzeta).T).T  # row i scaled by (1 - dtau_i)/(1 + dzeta_ij)
        * (one_plus_kappa[None, :] / one_plus_kappa[:, None])
    )
    eye = np.eye(n)
    try:
        ratio = np.linalg.solve(eye - lam_adj.T, np.ones(n))
    except np.linalg.LinAlgError:
        raise EquilibriumError("I - Lam^T is singular at this cost rate")
    if np.any(ratio <= 0.0):
        raise EquilibriumError("output/consumption ratio is not positive")
    log_ratio = np.log(ratio)
    shifter = (
        -phi * psi / (1.0 + phi) * log_ratio
        + psi / (1.0 + phi) * np.log(psi_adj)
        + np.sum(lam * np.log(lam_adj), axis=1)
    )
    output_shifter = shifter + (eye - lam) @ log_ratio
    return EquilibriumMaps(psi_adj, lam_adj, ratio, shifter, output_shifter)


def output_and_consumption(maps, elasticities, a_t):
    """Closed-form sectoral output and consumption at cumulative log-productivity a_t."""
    eye = np.eye(elasticities.n_sectors)
    a_t = np.asarray(a_t, dtype=float)
    log_c = np.linalg.solve(eye - elasticities.lam, a_t + maps.consumption_shifter)
    log_y = np.linalg.solve(eye - elasticities.lam, a_t + maps.output_shifter)
    return np.exp(log_y), np.exp(log_c)


def _fixed_point_lamadj_psi(elasticities, d):
    maps = equilibrium_maps(elasticities, d)
    return maps.psi_adj, maps.lam_adj


def equilibrium_oracle(
    elasticities, a_t, d, damping=0.5, max_iter=10_000, tol=1e-12
):
    """Solve the 2I-equation goods/production system by damped fixed point.

    This is the independent route used to validate the closed form: it never
    inverts I - lam. Iterates the output/consumption ratio through the
    goods-market identity and log-consumption through the production
    identity, then reads output off the ratio.

    Raises:
        OracleError: when either iteration fails to reach its tolerance.
    """
    psi, lam, phi = elasticities.psi, elasticities.lam, elasticities.phi
    n = elasticities.n_sectors
    psi_adj, lam_adj = _fixed_point_lamadj_psi(elasticities, d)
    a_t = np.asarray(a_t, dtype=float)

    ratio = np.ones(n)
    for _ in range(max_iter):
        new = 1.0 + lam_adj.T @ ratio
        if np.max(np.abs(new - ratio)) <= tol:
            ratio = new
            break
        ratio = (1.0 - damping) * ratio + damping * new
    else:
        raise OracleError("output/consumption ratio iteration did not converge")

    log_ratio = np.log(ratio)
    base = (
        a_t
        - phi * psi / (1.0 + phi) * log_ratio
        + psi / (1.0 + phi) * np.log(psi_adj)
        + np.sum(lam * np.log(lam_adj), axis=1)
    )
    log_c = np.zeros(n)
    for _ in range(max_iter):
        new = base + lam @ log_c
        if np.max(np.abs(new - log_c)) <= tol:
            log_c = new
            break
        log_c = (1.0 - damping) * log_c + damping * new
    else:
        raise OracleError("log-consumption iteration did not converge")

    c = np.exp(log_c)
    y = ratio * c
    return y, c


def equilibrium_residual(elasticities, d, y, c, a_t):
    """Max relative residual of (y, c) in the original 2I equilibrium system."""
    psi, lam, phi = elasticities.psi, elasticities.lam, elasticities.phi
    psi_adj, lam_adj = _fixed_point_lamadj_psi(elasticities, d)
    a_level = np.exp(np.asarray(a_t, dtype=float))
    n = elasticities.n_sectors
    goods = np.empty(n)
    prod = np.empty(n)
    for i in range(n):
        goods[i] = c[i] + np.sum(lam_adj[:, i] * (c[i] / c) * y) - y[i]
        ratio_i = y[i] / c[i]
        prod[i] = (
            a_level[i]
            * (psi_adj[i] * ratio_i) ** (psi[i] / (1.0 + phi))
            * np.prod((lam_adj[i, :] * c * ratio_i) ** lam[i, :])
            - y[i]
        )
    return max(np.max(np.abs(goods / y)), np.max(np.abs(prod / y)))
