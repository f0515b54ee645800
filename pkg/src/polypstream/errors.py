"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when user-supplied data (files, CLI values, configs) is invalid.

    The CLI maps this to exit code 1; anything else that escapes is treated
    as an internal invariant violation (exit code 2).
    """


class SequencingError(InputError):
    """Raised when frames arrive out of order in a streaming pipeline."""
