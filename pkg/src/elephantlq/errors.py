"""Exception hierarchy shared by the solvers and the CLI."""


class ElephantLQError(Exception):
    """Base class for all library errors."""


class ConfigurationError(ElephantLQError, ValueError):
    """Invalid grid, coefficient or scenario configuration."""


class RangeError(ElephantLQError, ValueError):
    """A time argument lies outside the domain of a sampled function."""


class ShapeError(ElephantLQError, ValueError):
    """Matrix shapes are inconsistent."""


class DivergenceError(ElephantLQError, ArithmeticError):
    """A time integration produced non-finite values.

    Attributes
    ----------
    time : float
        Model time at which the first non-finite value appeared.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConditioningError(ElephantLQError, ArithmeticError):
    """A matrix that must be inverted is singular or badly conditioned."""

    def __init__(self, message, node=None, condition=None):
        super().__init__(message)
        self.node = node
        self.condition = condition


class ConvergenceError(ElephantLQError, RuntimeError):
    """An iterative solver failed to converge (or its output was refused)."""


class SimulationError(ElephantLQError, ArithmeticError):
    """A Monte Carlo path produced non-finite values."""

    def __init__(self, message, path=None, step=None):
        super().__init__(message)
        self.path = path
        self.step = step
