"""Error types shared across the toolkit."""


class DataError(Exception):
    """Invalid data, file format, or invariant violation.

    The CLI maps this (and missing input files) to exit code 3, as opposed
    to flag/usage problems which exit 2.
    """
