"""Exception types shared across the toolkit."""


class VmtError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(VmtError):
    """Invalid configuration value or malformed config file."""


class DataError(VmtError):
    """Malformed or inconsistent input data.

    Carries an optional source location so CLI error reports can point at the
    offending line.
    """

    def __init__(self, message, *, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
