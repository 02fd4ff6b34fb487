"""Semantic exception hierarchy shared by all modules."""


class EvodynError(Exception):
    """Base class for all library errors."""


class InputError(EvodynError):
    """An argument violates a documented precondition or domain."""


class ConstructionError(EvodynError):
    """A composition constructor cannot satisfy its postconditions."""


class AnalysisError(EvodynError):
    """An analysis operation has no valid result for these inputs."""


class IntegrationError(EvodynError):
    """The ODE state became non-finite.  Carries the offending time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t={time:g})")
        self.time = time


class ConfigError(EvodynError):
    """A scenario config is missing, malformed, or has unknown keys.

    ``line`` is the 1-based line number in the config file when the error
    is attributable to one, else None (e.g. missing file, bad override).
    """

    def __init__(self, message: str, line: int | None = None):
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(message + suffix)
        self.line = line
