"""Exception hierarchy. ``ConfigError`` maps to CLI exit code 2, every other
``NodalLabError`` to exit code 3."""


class NodalLabError(Exception):
    pass


class ConfigError(NodalLabError, ValueError):
    pass


class NumericalError(NodalLabError):
    pass


class InvalidPointError(NumericalError, ValueError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class ResolutionError(NumericalError):
    pass


class DegenerateFieldError(NumericalError):
    pass


class NoNodalSetError(NumericalError):
    pass


class MeshError(NumericalError, ValueError):
    pass


class NotClosedError(MeshError):
    pass


class MeshQualityError(MeshError):
    pass


class InsufficientSweepError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, best_residual):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual
