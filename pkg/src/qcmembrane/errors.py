"""Exception hierarchy shared by every stage of the pipeline."""


class QCMembraneError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class InvalidFieldError(QCMembraneError):
    pass


class InvalidDilatationError(QCMembraneError):
    pass


class NonConvergenceError(QCMembraneError):
    def __init__(self, message, last_update=None):
        super().__init__(message)
        self.last_update = last_update


class OutOfWindowError(QCMembraneError):
    pass


class InversionError(QCMembraneError):
    def __init__(self, message, worst_residual=None):
        super().__init__(message)
        self.worst_residual = worst_residual


class DegenerateCellError(InversionError):
    pass


class GeometryError(QCMembraneError):
    pass


class ResolutionError(GeometryError):
    pass


class EmptyInputError(QCMembraneError):
    pass


class ResourceError(QCMembraneError):
    pass


class SolverError(QCMembraneError):
    pass


class UnreliableMapError(QCMembraneError):
    pass


class DomainError(QCMembraneError, ValueError):
    pass


class ConfigError(QCMembraneError):
    pass


class StageError(QCMembraneError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
