"""Exception types shared across the package.

The CLI maps these onto distinct exit codes (validation 2, numeric 3,
I/O errors from the OS propagate as 4).
"""


class ValidationError(ValueError):
    """Bad configuration, dimensions, or argument values."""


class NumericError(RuntimeError):
    """Non-finite values or failed factorizations during computation."""
