from typing import Any, Dict, Optional


class SubbotinError(ValueError):
    category = "error"


class DomainError(SubbotinError):
    category = "domain"


class InvalidParameterError(SubbotinError):
    category = "invalid-parameter"


class DegenerateColumnError(SubbotinError):
    category = "degenerate-column"

    def __init__(self, column: int, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"column {column} is constant and can't be standardized")


class NormalizabilityError(SubbotinError):
    category = "normalizability"


class NumericalDivergenceError(SubbotinError):
    category = "numerical-divergence"


class SolverError(SubbotinError):
    category = "solver"

    def __init__(self, message: str, lambda_: Optional[float] = None, node: Optional[int] = None):
        self.lambda_ = lambda_
        self.node = node
        where = []
        if node is not None:
            where.append(f"node {node}")
        if lambda_ is not None:
            where.append(f"lambda {lambda_:.6g}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DegenerateThetaError(SubbotinError):
    category = "degenerate-theta"


class UnstableHawkesError(SubbotinError):
    category = "unstable-hawkes"


class GevFitError(SubbotinError):
    category = "gev-fit"

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, column: Optional[int] = None):
        self.diagnostics = diagnostics or {}
        self.column = column
        super().__init__(message if column is None else f"column {column}: {message}")


class ParseError(SubbotinError):
    category = "parse"

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        if line is not None and column is not None:
            message = f"line {line}, column {column}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(SubbotinError):
    category = "config"


def error_category(error: BaseException) -> str:
    return error.category if isinstance(error, SubbotinError) else "internal"
