"""Numerical kernels: Gaussian special functions, linear algebra, quadrature,
empirical quantiles, and the reproducible random-stream contract.

Everything here is pure and reentrant; random streams are value-like objects
owned by one consumer at a time.
"""

from .gaussian import bivariate_normal_cdf, normal_cdf, normal_pdf, normal_quantile
from .linalg import SpectralReport, matrix_exponential, spectral_report
from .quadrature import QuadratureSpec, integrate
from .quantiles import empirical_quantile, empirical_quantile_rows
from .rng import rng_stream

__all__ = [
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "bivariate_normal_cdf",
    "matrix_exponential",
    "spectral_report",
    "SpectralReport",
    "QuadratureSpec",
    "integrate",
    "empirical_quantile",
    "empirical_quantile_rows",
    "rng_stream",
]
