"""Exception hierarchy shared across the package."""


class CoagBreakError(Exception):
    """Base class for all package errors."""


class DomainError(CoagBreakError, ValueError):
    """A volume or parameter lies outside its admissible domain."""


class DivergentMomentError(DomainError):
    """A requested moment of the daughter distribution diverges at zero."""


class AssemblyError(CoagBreakError):
    """The operator workspace could not be assembled."""


class StiffnessError(CoagBreakError):
    """Step size fell below ``dt_min`` with the step still being rejected."""


class SolverError(CoagBreakError):
    """Non-finite values appeared in the state during integration."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


class ConfigError(CoagBreakError):
    """Configuration document is malformed or infeasible.

    ``errors`` holds every validation message found, not only the first.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
