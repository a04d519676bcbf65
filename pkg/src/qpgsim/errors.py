"""Exception hierarchy shared by every qpgsim module."""


class QpgError(Exception):
    """Base class for all qpgsim errors."""


class ParameterError(QpgError, ValueError):
    """A parameter set violates its documented invariants."""


class InvalidTruncationError(ParameterError):
    """A Fock-space truncation is too small for the requested operation."""


class HermiticityError(QpgError, ValueError):
    pass


class SpaceMismatchError(QpgError, ValueError):
    pass


class NotAProjectorError(QpgError, ValueError):
    pass


class PreconditionError(QpgError, ValueError):
    """An input state or gate does not have the required form."""


class GateQualityError(QpgError):
    """The local-phase correction left residual weight above tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(QpgError):
    """Time stepping did not converge under step halving.

    ``diagnostics`` holds one ``(dt, infidelity)`` pair per comparison.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class RecipeMismatchError(QpgError):
    """No local-phase correction brings a gate within tolerance of its target."""

    def __init__(self, message, best_distance, fit=None):
        super().__init__(message)
        self.best_distance = best_distance
        self.fit = fit
