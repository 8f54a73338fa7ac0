"""Exception hierarchy shared by all solver modules."""


class DNPError(Exception):
    """Base class for every error raised by dnp2d."""


class DomainError(DNPError, ValueError):
    """An argument lies outside the precondition of an operation."""


class SingularityError(DomainError):
    """The ODE right-hand side was requested at the singular point with incompatible data."""


class SolverFailure(DNPError, RuntimeError):
    """An integrator could not continue; ``y`` holds the abscissa where it stopped."""

    def __init__(self, message, y=None):
        super().__init__(message)
        self.y = y


class ConvergenceError(DNPError, RuntimeError):
    """A fixed-point iteration did not contract."""


class StepRejected(DNPError, RuntimeError):
    """A single time step violated a monotonicity or stability check; retry with smaller dt."""


class StiffFailure(DNPError, RuntimeError):
    """Adaptive stepping drove dt below its floor."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class BlowUpError(DNPError, FloatingPointError):
    """Non-finite values appeared in a field; ``t`` is the time stamp of the offending step."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ConfigError(DomainError):
    """A configuration field violates the precondition of the operation it feeds."""
