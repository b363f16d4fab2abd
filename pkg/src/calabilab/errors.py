from typing import Any, Optional


class CalabiLabError(Exception):
    pass


class ContractViolation(CalabiLabError, ValueError):
    pass


class UnsupportedOperation(CalabiLabError, NotImplementedError):
    pass


class InvalidArgument(CalabiLabError, ValueError):
    pass


class InvalidPotential(InvalidArgument):
    pass


class DegeneratePlane(InvalidArgument):
    pass


class FitFailure(CalabiLabError, ValueError):
    pass


class StepFailure(CalabiLabError, ArithmeticError):
    def __init__(self, message: str, trace: Any = None) -> None:
        super().__init__(message)
        self.trace = trace


class StiffnessFailure(StepFailure):
    pass


class MonotonicityViolation(CalabiLabError, ArithmeticError):
    def __init__(self, message: str, trace: Any = None) -> None:
        super().__init__(message)
        self.trace = trace


class GeodesicFailure(CalabiLabError, RuntimeError):
    def __init__(self, message: str, best_path: Any = None) -> None:
        super().__init__(message)
        self.best_path = best_path


class EigenSolverError(CalabiLabError, RuntimeError):
    def __init__(self, message: str, iterations: Optional[int] = None) -> None:
        super().__init__(message)
        self.iterations = iterations


class CheckpointError(CalabiLabError, OSError):
    pass


class ConfigError(CalabiLabError, ValueError):
    def __init__(
        self,
        message: str,
        path: str = "",
        line: Optional[int] = None,
        column: Optional[int] = None,
    ) -> None:
        location = path or "<root>"
        if line is not None:
            location = f"line {line}, column {column}"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.column = column
