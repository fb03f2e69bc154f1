"""Exception types raised by lindcycle."""


class LindcycleError(Exception):
    """Base class for all library errors."""


class DimensionError(LindcycleError, ValueError):
    """Operands live on Hilbert spaces of different dimension."""


class InvalidOperatorError(LindcycleError, ValueError):
    """An operator violates a structural invariant (Hermiticity, trace, positivity)."""


class EigenNonConvergenceError(LindcycleError, ArithmeticError):
    """An iterative eigensolver hit its iteration cap."""


class ProtocolError(LindcycleError, ValueError):
    """A generator, protocol or schedule is malformed."""


class DegenerateFixedSpaceError(LindcycleError):
    """The monodromy map has more than one unit eigenvalue."""

    def __init__(self, count: int):
        super().__init__(f"monodromy has {count} eigenvalues at 1; limit cycle is not unique")
        self.count = count


class NonConvergentError(LindcycleError, ArithmeticError):
    """Fixed-point iteration stalled or two solvers disagree."""


class WindowError(LindcycleError, ValueError):
    """A time window does not satisfy the Spohn conditions it was supposed to."""


class ExponentRangeError(LindcycleError, OverflowError):
    """The argument of a matrix exponential is too large to evaluate reliably."""
