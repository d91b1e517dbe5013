"""Exception types shared across the package."""

__all__ = ["FormatError", "DivergenceError"]


class FormatError(ValueError):
    """A binary or CSV artifact failed structural validation.

    The message names the offending field or byte offset; no partial
    object is ever returned alongside this error.
    """


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient.

    ``history`` holds the per-epoch rows completed before the abort.
    """

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
