"""Exception types shared across the solver stack."""


class CovcutError(Exception):
    """Base class for all covcut errors."""


class InvalidInput(CovcutError):
    """Malformed or inconsistent user input."""


class NotPositiveDefinite(CovcutError):
    """A matrix required to be positive definite is not."""


class SingularUpdate(CovcutError):
    """A low-rank inverse update would cross the positive-definite boundary."""


class Unconverged(CovcutError):
    """Iteration budget exhausted above the gap tolerance.

    Carries the last iterate (with its still-valid dual bound) in
    ``self.solution`` so callers can keep working with a certified,
    if loose, result.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class Infeasible(CovcutError):
    """No support satisfies the cardinality budget and structural constraints."""


class DegenerateInstance(CovcutError):
    """Synthetic instance generation failed after the retry budget."""
