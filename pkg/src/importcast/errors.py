"""Exception hierarchy shared by the pipeline stages."""


class ImportcastError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ImportcastError, ValueError):
    """A required column is missing from the input header."""

    def __init__(self, column: str, header: list[str] | None = None):
        self.column = column
        self.header = header
        msg = f"missing required column {column!r}"
        if header is not None:
            msg += f" (header has: {', '.join(header)})"
        super().__init__(msg)


class RowError(ImportcastError, ValueError):
    """A data row violates a record invariant."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ConfigError(ImportcastError, ValueError):
    pass


class UsageError(ImportcastError, ValueError):
    pass


class NumericError(ImportcastError, ArithmeticError):
    """Overflow, a singular segment rate, or another non-finite quantity."""


class ConvergenceError(ImportcastError, RuntimeError):
    def __init__(self, message: str, last_loss: float):
        self.last_loss = last_loss
        super().__init__(f"{message} (last loss {last_loss!r})")


class InfeasiblePlanError(ImportcastError, ValueError):
    """Not enough history to place the requested number of cutoffs."""

    def __init__(self, requested: int, max_feasible: int):
        self.requested = requested
        self.max_feasible = max_feasible
        super().__init__(
            f"cannot place {requested} distinct cutoffs; "
            f"maximum feasible is {max_feasible}"
        )


class BacktestError(ImportcastError, RuntimeError):
    def __init__(self, model_name: str, cutoff: int, cause: BaseException):
        self.model_name = model_name
        self.cutoff = cutoff
        super().__init__(f"{model_name} failed at cutoff {cutoff}: {cause}")
