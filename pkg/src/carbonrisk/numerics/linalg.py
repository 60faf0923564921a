"""Matrix exponential and spectral diagnostics for the mean-reversion matrix."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import DomainError


def matrix_exponential(m):
    """Matrix exponential by scaling-and-squaring with a Pade approximant.

    Raises:
        DomainError: if the input is not a finite square matrix.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("matrix_exponential requires a square matrix")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix_exponential requires finite entries")
    return scipy.linalg.expm(m)


@dataclass(frozen=True)
class SpectralReport:
    """Spectral diagnostics of a mean-reversion matrix G.

    Attributes:
        eigen_real_parts: real parts of the eigenvalues of G.
        is_hurwitz: True when -G is Hurwitz, i.e. every eigenvalue of G has
            strictly positive real part.
        lambda_gamma: decay rate of ||exp(-G t)||, the smallest real part of
            the eigenvalues of G.
        c_gamma: constant such that ||exp(-G t)|| <= c_gamma e^{-lambda_gamma t}
            on the sampled range (numerical bound, slightly inflated).
    """

    eigen_real_parts: np.ndarray
    is_hurwitz: bool
    lambda_gamma: float
    c_gamma: float


def spectral_report(gamma, n_grid=512):
    """Check the Hurwitz condition on -gamma and compute the decay bound.

    The bound constant is estimated as the supremum of
    ||exp(-gamma t)|| * e^{lambda_gamma t} over a grid covering several decay
    times, inflated by 5% to cover inter-grid peaks.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise DomainError("spectral_report requires a square matrix")
    if not np.all(np.isfinite(gamma)):
        raise DomainError("spectral_report requires finite entries")
    real_parts = np.real(np.linalg.eigvals(gamma))
    hurwitz = bool(np.all(real_parts > 0.0))
    lam = float(np.min(real_parts))
    if not hurwitz:
        return SpectralReport(real_parts, False, lam, np.inf)
    horizon = 12.0 / lam
    ts = np.linspace(0.0, horizon, n_grid)
    sup = 1.0  # value at t = 0
    for t in ts[1:]:
        sup = max(sup, np.linalg.norm(scipy.linalg.expm(-gamma * t), 2) * np.exp(lam * t))
    return SpectralReport(real_parts, True, lam, 1.05 * sup)
