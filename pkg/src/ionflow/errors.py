"""Exception taxonomy shared by all solver modules.

CLI exit-code mapping: ConfigError -> 2, SolverError -> 3,
InvariantViolation and subclasses -> 4.
"""


class IonflowError(Exception):
    """Base class for all package errors."""


class ConfigError(IonflowError):
    """Invalid, unparseable, or physically inadmissible configuration."""


class SolverError(IonflowError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InvariantViolation(IonflowError):
    """A runtime-checkable property of the discretization was violated."""


class PositivityError(InvariantViolation):
    """A concentration went negative: the time step was too large."""

    def __init__(self, species_index, cell, value, suggested_dt):
        super().__init__(
            "species %d went negative at cell %s (value %.6e); "
            "retry with dt <= %.6e" % (species_index, cell, value, suggested_dt))
        self.species_index = species_index
        self.cell = cell
        self.value = value
        self.suggested_dt = suggested_dt


class StabilityError(InvariantViolation):
    """Requested dt exceeds the enforced stability bound."""

    def __init__(self, dt, bound, context):
        super().__init__(
            "dt = %.6e exceeds the %s stability bound %.6e" % (dt, context, bound))
        self.dt = dt
        self.bound = bound
        self.context = context
