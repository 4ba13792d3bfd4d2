"""Exception types shared across the package.

Each error maps to one failure family so the command line layer can
translate it into a stable exit code without inspecting messages.
"""


class PglrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PglrError):
    """An argument value is outside its documented domain."""


class DimensionMismatchError(InvalidInputError):
    """Two operands that must agree in shape do not.

    A special case of invalid input, kept separate so the command line
    can report it with its own exit code.
    """


class FormatError(PglrError):
    """A file does not conform to its on-disk format."""


class InternalConsistencyError(PglrError):
    """An invariant the library maintains internally was violated."""
