"""Exception hierarchy shared by all modules."""


class TankError(Exception):
    """Base class for every error raised by the package."""


class DomainError(TankError, ValueError):
    """An argument lies outside the domain of a formula."""


class ConfigError(TankError, ValueError):
    """A configuration, scenario or gain set is incomplete or inconsistent."""


class PreconditionError(TankError, ValueError):
    """A documented precondition of an operation does not hold."""


class NotHCompliantError(TankError):
    """The friction model has no level-only bound of the form h^-2 kappa <= Kbar(omega)."""


class CertificateScopeError(TankError):
    """A certificate was requested for a setup outside the cases it covers."""


class FitError(TankError, ValueError):
    """A decay fit could not be performed."""


class NumericError(TankError, ArithmeticError):
    """A numerical routine failed."""


class BlowUpError(TankError, FloatingPointError):
    """The state left the domain where the equations make sense (h <= 0 or non-finite)."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
