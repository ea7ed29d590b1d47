"""Exception hierarchy shared by all modules."""


class DepMineError(Exception):
    """Base class for library errors."""


class ParseError(DepMineError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(DepMineError, ValueError):
    """Input is well formed but outside the domain of an operation."""


class CapacityError(DepMineError):
    """Request exceeds a configured size cap."""


class ConfigError(DepMineError, ValueError):
    pass


class UnknownAttributeError(DepMineError, LookupError):
    pass
