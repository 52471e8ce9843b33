"""Exception types raised across the package."""


class AmgeError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(AmgeError, ValueError):
    pass


class SingularLocalSystem(AmgeError):
    """A small dense system could not be factored.

    ``context`` carries whatever the caller knew about where the system
    came from (agglomerate id, space index, ...).
    """

    def __init__(self, message, context=None):
        self.context = dict(context or {})
        if self.context:
            detail = ", ".join(f"{k}={v}" for k, v in self.context.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class NotPositiveDefinite(AmgeError):
    pass


class ParseError(AmgeError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TopologyError(AmgeError):
    pass


class RepairFailed(TopologyError):
    pass


class UnknownAttribute(AmgeError, KeyError):
    pass


class ZeroMeasureEntity(AmgeError):
    pass


class ExactnessViolation(AmgeError):
    pass


class ConfigError(AmgeError, ValueError):
    pass


class ZeroDiagonal(AmgeError):
    pass


class IndefinitePreconditioner(AmgeError):
    pass
