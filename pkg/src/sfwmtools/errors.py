"""Exception types shared across the toolkit."""


class DomainError(ValueError):
    """Input outside the range where a model is defined."""


class NoSolution(RuntimeError):
    """A root search found no sign change in its bracket."""

    def __init__(self, message, bracket=None, values=None):
        super().__init__(message)
        self.bracket = bracket
        self.values = values


class FitError(RuntimeError):
    """An optimizer failed or the data cannot constrain the fit."""

    def __init__(self, message, last_params=None, residual=None):
        super().__init__(message)
        self.last_params = last_params
        self.residual = residual
