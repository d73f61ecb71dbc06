"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/input problems exit with 2,
numerical failures with 3.
"""


class HesslabError(Exception):
    """Base class for package errors."""


class InputError(HesslabError):
    """Bad user input: malformed files, out-of-range arguments, schema violations."""


class NumericalError(HesslabError):
    """A numerical procedure failed (eigensolver breakdown, divergence, NaN loss)."""
