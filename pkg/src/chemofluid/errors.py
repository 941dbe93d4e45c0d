"""Exception hierarchy. Each class maps to one harness exit code."""


class ChemofluidError(Exception):
    exit_code = 2


class ConfigurationError(ChemofluidError, ValueError):
    exit_code = 3


class DomainError(ChemofluidError, ValueError):
    """A function was evaluated outside its domain (e.g. v <= 0)."""


class SolverError(ChemofluidError):
    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class GaugeError(SolverError):
    """Neumann right-hand side violates the compatibility condition."""


class PositivityError(SolverError):
    pass


class StiffnessError(SolverError):
    pass


class DiagnosticError(ChemofluidError):
    exit_code = 1


class FitError(DiagnosticError):
    pass


class CalibrationError(DiagnosticError):
    pass


class QuadratureError(DiagnosticError):
    pass


class OracleError(ChemofluidError):
    pass
