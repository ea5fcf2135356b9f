"""Exception types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid experiment or solver configuration (exit code 1)."""


class DataError(ValueError):
    """Malformed or inconsistent input data (exit code 2)."""


class NumericError(RuntimeError):
    """Numerical failure during optimization or decomposition (exit code 3)."""


class TNMemoryError(NumericError):
    """The exact TN core update would exceed the intermediate-memory budget."""
