"""Exception hierarchy. Every error carries a stable code used by the CLI."""


class MivCellKitError(Exception):
    code = "E_INTERNAL"


class InputError(MivCellKitError):
    """A required input file or directory is missing or unreadable."""

    code = "E_INPUT"


class ParseError(MivCellKitError, ValueError):
    code = "E_PARSE"

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DomainError(MivCellKitError, ValueError):
    """Non-finite or otherwise out-of-domain numeric input."""

    code = "E_DOMAIN"


class ParameterError(MivCellKitError, ValueError):
    """Model parameters violate their invariants."""

    code = "E_PARAM"


class PreconditionError(MivCellKitError, ValueError):
    code = "E_PRECONDITION"


class ExtractionError(MivCellKitError, RuntimeError):
    code = "E_EXTRACTION"


class ConvergenceError(MivCellKitError, RuntimeError):
    code = "E_CONVERGENCE"

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class MeasurementError(MivCellKitError, ValueError):
    code = "E_MEASURE"
