"""Exception types raised across the package."""


class ChoiceDesignError(Exception):
    """Base class for all package errors."""


class DimensionError(ChoiceDesignError, ValueError):
    """Array shapes or index ranges do not fit the problem size."""


class ConeError(ChoiceDesignError, ValueError):
    """A variogram lies outside the cone of conditionally negative definite matrices."""


class StructureError(ChoiceDesignError, ValueError):
    """A graph lacks a structural property an operation requires (chordal, tree, connected)."""


class ExistenceError(ChoiceDesignError, ValueError):
    """Choice data for which the maximum likelihood estimate does not exist."""

    def __init__(self, message, partition=None):
        super().__init__(message)
        self.partition = partition


class ConvergenceError(ChoiceDesignError, RuntimeError):
    """An iterative solver stopped before meeting its tolerances.

    ``best`` holds the best iterate found, so callers can still inspect it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RecoveryError(ChoiceDesignError, RuntimeError):
    """No design reproduces the optimal edge weights within tolerance."""

    def __init__(self, message, residual=None, design=None):
        super().__init__(message)
        self.residual = residual
        self.design = design
