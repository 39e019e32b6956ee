"""Exception hierarchy.

Every error raised on purpose by the package derives from DynHomogError so
the CLI can map it to an exit code without catching unrelated bugs.
"""


class DynHomogError(Exception):
    """Base class for package errors."""


class InvalidInput(DynHomogError, ValueError):
    pass


class NonPositiveInput(InvalidInput):
    pass


class EmptyCell(InvalidInput):
    pass


class CountMismatch(InvalidInput):
    pass


class InvalidTolerance(InvalidInput):
    pass


class SolverError(DynHomogError):
    """Numerical failure tied to a particular (omega, q) evaluation point."""

    def __init__(self, message, omega=None, q=None):
        self.omega = omega
        self.q = q
        context = ", ".join(f"{k}={v!r}" for k, v in (("omega", omega), ("q", q)) if v is not None)
        if context:
            message = f"{message} ({context})"
        super().__init__(message)


class NearPole(SolverError):
    """A reference-medium resonance nu = |xi + q| is too close to the requested point."""


class SingularSystem(SolverError):
    pass


class DegenerateDenominator(SolverError):
    pass


class InsufficientRoots(SolverError):
    def __init__(self, message, found, requested, omega=None, q=None):
        self.found = found
        self.requested = requested
        super().__init__(f"{message}: found {found} of {requested}", omega=omega, q=q)


class NotOnBranch(SolverError):
    pass


class ZeroAverage(SolverError):
    pass
