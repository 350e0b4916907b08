"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array argument has the wrong shape or an inconsistent dimension."""


class DomainError(ValueError):
    """A numeric argument is outside the domain of the operation."""


class ModelError(ValueError):
    """Model inputs violate a structural assumption (e.g. degenerate vertices)."""


class InsufficientDataError(ValueError):
    """Too few observations for the requested operation."""


class ConfigError(ValueError):
    """A configuration value or file is invalid."""


class NoUpdateError(RuntimeError):
    """An update step received no usable input (e.g. every batch was empty)."""


class AcceptanceCollapseError(RuntimeError):
    """Rejection sampling accepted essentially nothing for several iterations.

    Carries the partial solver report in the ``report`` attribute so callers
    can inspect the acceptance-rate trace that triggered the abort.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
