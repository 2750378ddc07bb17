"""Exception types raised across the package."""


class JndError(Exception):
    """Base class for all package errors."""


class ParseError(JndError, ValueError):
    """A file or table could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(JndError, ValueError):
    pass


class TilingError(JndError, ValueError):
    pass


class IoError(JndError, OSError):
    pass


class ExternalCodecError(JndError, RuntimeError):
    def __init__(self, message, stdout="", stderr="", returncode=None):
        super().__init__(message)
        self.stdout = stdout
        self.stderr = stderr
        self.returncode = returncode


class SelectionError(JndError, ValueError):
    pass


class MissingScoreError(JndError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(JndError, ValueError):
    pass


class ModelFormatError(JndError, ValueError):
    pass
