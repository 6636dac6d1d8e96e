class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


class ConfigError(ValueError):
    """Raised when an experiment config file cannot be parsed or validated."""

    def __init__(self, message, key=None, line=None):
        self.message = message
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
