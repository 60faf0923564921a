"""Semantic exception hierarchy for the engine.

Public functions raise these instead of bare ValueError so callers (and the
CLI exit-code mapping) can tell validation problems from data problems from
numerical failures.
"""


class CarbonRiskError(Exception):
    """Base error for this package."""


class DomainError(CarbonRiskError, ValueError):
    """An argument is outside its mathematical domain."""


class ValidationError(CarbonRiskError):
    """A model invariant is violated (non-Hurwitz matrix, bad elasticities, ...)."""


class DataError(CarbonRiskError):
    """Input data are missing, malformed, or insufficient for an estimator."""


class ConvergenceError(CarbonRiskError):
    """An iterative routine exhausted its budget.

    Carries the best estimate reached so far in ``estimate``.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class EquilibriumError(CarbonRiskError):
    """The multisector equilibrium is not solvable at some date."""


class OracleError(CarbonRiskError):
    """A test oracle (fixed-point solve, brute-force check) failed to converge."""
