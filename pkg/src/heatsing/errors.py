"""Exception types shared across the package."""


class DomainError(ValueError):
    """An evaluation was requested outside the mathematically admissible domain."""


class WindowError(DomainError):
    """A profile or iterated logarithm was evaluated outside its validity window.

    ``level`` identifies the first nesting level whose argument was nonpositive.
    """

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class ParseError(ValueError):
    """Syntax error in a profile expression, with the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class SolverError(RuntimeError):
    """The PDE solver could not produce a trustworthy solution."""


class VerdictContradiction(RuntimeError):
    """Numeric shell analysis contradicted the exact series verdict of a built-in family."""
