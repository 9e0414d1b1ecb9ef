"""Exception types raised across the package."""


class ArgumentError(ValueError):
    """Invalid argument: wrong dimension, out-of-range parameter, bad spec string."""


class NumericOverflowError(ArithmeticError):
    """An objective or gradient evaluation produced a non-finite value."""


class StiffnessError(RuntimeError):
    """The adaptive integrator's step size collapsed below its floor."""


class InsufficientDataError(RuntimeError):
    """Too few informative samples to fit an estimate."""
