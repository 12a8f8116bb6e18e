"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
file parse problems exit 3, and verification failures exit 1.
"""


class CosattnError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(CosattnError):
    """Operand shapes are inconsistent with the requested operation."""


class ConfigurationError(CosattnError):
    """A config value is invalid or incompatible with the inputs."""


class MatrixParseError(CosattnError):
    """A matrix or image file is malformed.

    ``line`` is the 1-based line number where parsing failed, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
