"""Exception types shared across the toolkit."""


class AmgError(Exception):
    """Base class for all amgkit errors."""


class DimensionMismatchError(AmgError):
    """Operands have incompatible shapes."""

    def __init__(self, op, left, right):
        super().__init__(f"{op}: incompatible shapes {left} and {right}")
        self.op = op
        self.left = left
        self.right = right


class ZeroDiagonalError(AmgError):
    """A matrix row is missing a usable diagonal entry."""

    def __init__(self, row, detail="zero or missing diagonal"):
        super().__init__(f"row {row}: {detail}")
        self.row = row


class NotSpdError(AmgError):
    """An operator assumed symmetric positive definite turned out not to be."""


class BreakdownError(AmgError):
    """A Krylov recurrence broke down and could not be restarted."""


class IoFormatError(AmgError):
    """A matrix file is malformed; message carries file and line context."""


class RecipeError(AmgError):
    """A run configuration (recipe file, flag or environment key) is invalid."""
