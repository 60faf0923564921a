"""Empirical quantiles with the lower order-statistic convention."""

import math

import numpy as np

from ..errors import DomainError


def _order_statistic_index(n, level):
    """ceil(level * n), guarded against float noise (0.99 * 100 -> 99.000...01)."""
    target = level * n
    k = math.ceil(target - 1e-9 * max(1.0, abs(target)))
    return min(max(k, 1), n)


def empirical_quantile(samples, level):
    """The ceil(level * n)-th order statistic of the sample.

    This is the lower empirical quantile: deterministic under permutation,
    always an observed value, and conservative when used as a VaR.

    Args:
        samples: non-empty 1-d collection of reals.
        level: probability in the open interval (0, 1).

    Raises:
        DomainError: on an empty sample or a level outside (0, 1).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("empirical_quantile requires a non-empty sample")
    if not (0.0 < level < 1.0):
        raise DomainError("quantile level must lie in (0, 1)")
    k = _order_statistic_index(x.size, level)
    return float(np.partition(x, k - 1)[k - 1])


def empirical_quantile_rows(x, level):
    """Row-wise lower empirical quantile of a 2-d array, same convention."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise DomainError("empirical_quantile_rows requires a (rows, samples) array")
    if not (0.0 < level < 1.0):
        raise DomainError("quantile level must lie in (0, 1)")
    k = _order_statistic_index(x.shape[1], level)
    return np.partition(x, k - 1, axis=1)[:, k - 1]
