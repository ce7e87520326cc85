"""Exception types. The CLI maps these onto exit codes."""


class DeadlineBcastError(Exception):
    """Base class for library errors."""


class ConfigError(DeadlineBcastError, ValueError):
    """Invalid configuration or malformed input (CLI exit code 2)."""


class GuardError(DeadlineBcastError, ValueError):
    """A size guard on an enumeration was violated (CLI exit code 3)."""


class OracleMismatchError(DeadlineBcastError):
    """Two routes that must agree (e.g. greedy policy vs cut-set test) did not."""
