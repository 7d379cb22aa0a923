"""Exception types shared across the package.

The CLI maps these onto process exit codes: validation problems exit with 2,
file-format and OS-level I/O problems with 3, numerical failures with 4.
"""

__all__ = [
    "ValidationError",
    "SymmetryViolationError",
    "UnsupportedStructureError",
    "CubeFormatError",
    "BadMagicError",
    "TruncatedPayloadError",
    "UnknownDtypeError",
]


class ValidationError(ValueError):
    """Caller supplied inconsistent shapes, parameters, or options."""


class SymmetryViolationError(ArithmeticError):
    """An inverse transform expected conjugate-symmetric input and did not get it.

    This signals an upstream bug (a spectrum was edited in a way that cannot
    come from a real image), not bad user input.
    """


class UnsupportedStructureError(RuntimeError):
    """A fast solver's structural preconditions do not hold for this system."""


class CubeFormatError(Exception):
    """An on-disk file violates its format (cube container or SRF table)."""


class BadMagicError(CubeFormatError):
    """File does not start with the cube container magic."""


class TruncatedPayloadError(CubeFormatError):
    """Payload is shorter than the header promises."""


class UnknownDtypeError(CubeFormatError):
    """Header names a dtype the reader does not support."""
