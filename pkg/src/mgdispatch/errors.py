"""Exception types raised across the package."""


class MgDispatchError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(MgDispatchError, ValueError):
    pass


class InvalidInputError(MgDispatchError, ValueError):
    pass


class InfeasibleMomentsError(MgDispatchError, ValueError):
    pass


class UndefinedMetricError(MgDispatchError, ValueError):
    pass


class InvalidStateError(MgDispatchError, RuntimeError):
    pass


class SchemaError(MgDispatchError, ValueError):
    """Malformed or inconsistent network dataset."""


class TopologyError(SchemaError):
    """Network is not a single tree rooted at the substation."""


class ConfigError(MgDispatchError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class PipelineError(MgDispatchError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage} stage failed: {cause}")
