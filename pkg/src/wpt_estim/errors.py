"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Input has the wrong shape, sign or structure."""


class DegenerateDesignError(ValueError):
    """The design cannot be evaluated (e.g. ``v^H H a == 0``)."""


class InfeasibleError(ValueError):
    """The requested target cannot be met by any design."""


class CertificateError(RuntimeError):
    """A solver output violates a structural property it must satisfy.

    Raised when, for example, the relaxed amplification matrix is not
    numerically rank one. This points to a solver problem, not a modelling
    gap, so it is never silently patched over.
    """


class SolverError(RuntimeError):
    """The inner SDP solve did not return an optimal point."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
