class CapwaveError(Exception):
    """Base class for library errors."""


class ConfigurationError(CapwaveError, ValueError):
    """Inconsistent truncations, dimensions or certificate fields."""


class DomainError(CapwaveError, ValueError):
    """An operation was called outside its documented index range."""


class InversionError(CapwaveError, ArithmeticError):
    def __init__(self, pivot: int, magnitude):
        super().__init__(f"matrix singular to working precision at pivot {pivot} (|pivot|={magnitude})")
        self.pivot = pivot


class DivergenceError(CapwaveError, ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class ParseError(CapwaveError, ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())
        self.line = line
