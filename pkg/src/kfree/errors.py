"""Shared exception types."""


class RegimeError(Exception):
    """A computation was requested outside its supported numerical regime.

    Typical case: Weingarten inversion at D < k, where the Gram matrix is
    singular and only a pseudo-inverse would exist.
    """
