"""Exception hierarchy shared by all pipeline modules."""


class IntentMineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(IntentMineError):
    """A caller-supplied parameter is outside its documented domain."""


class InvalidInputError(IntentMineError):
    """Input data violates a precondition (empty, mismatched dims, ...)."""


class InputFormatError(IntentMineError):
    """A data file could not be parsed. Carries file path and line number."""

    def __init__(self, message: str, path=None, line_no: int | None = None):
        self.path = path
        self.line_no = line_no
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line_no is not None:
                loc += f":{line_no}"
            loc = f" [{loc}]"
        super().__init__(f"{message}{loc}")


class UndefinedMetricError(IntentMineError):
    """A metric is undefined for the given input (e.g. one-cluster silhouette)."""


class ConfigError(IntentMineError):
    """Pipeline configuration is missing, malformed, or out of domain."""
