"""Exception hierarchy for the ergolq package.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps a subset of these to stable exit codes.
"""


class ErgolqError(Exception):
    """Base class for all package errors."""


class ProblemFormatError(ErgolqError):
    """Problem description is syntactically invalid (bad JSON, wrong types,
    non-finite entries)."""


class DimensionError(ErgolqError):
    """Array shapes are inconsistent with the declared n, m, d."""


class NotStabilizing(ErgolqError):
    """A feedback gain fails the mean-square stability test."""


class StabilizerNotFound(ErgolqError):
    """The stabilizer search exhausted its iteration budget."""


class SingularLinearSystem(ErgolqError):
    """A linear solve has no (reliable) solution."""


class RangeViolation(ErgolqError):
    """A vector or matrix falls outside the range of a singular coefficient
    matrix, so a pseudoinverse-based formula would silently lie."""


class NotPositiveDefinite(ErgolqError):
    """A matrix required to be positive definite is not."""


class RiccatiError(ErgolqError):
    """Base class for Newton-Kleinman failures."""


class LostPositivity(RiccatiError):
    """R + sum_k D_k^T P D_k stopped being positive definite mid-iteration."""


class LostStability(RiccatiError):
    """An updated feedback gain left the stabilizer set."""


class MaxIterations(RiccatiError):
    """Iteration budget exhausted before the residual tolerance was met."""


class Diverging(ErgolqError):
    """Regularized values keep falling without stabilizing; the problem
    looks unbounded below.  Carries the partial trace for reporting."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalBlowup(ErgolqError):
    """A simulated path exceeded the overflow guard."""


class ConfigError(ErgolqError):
    """A configuration value violates a documented precondition."""
