"""Semantic exception hierarchy used across the package."""


class LocalScoresError(Exception):
    """Base class for all package errors."""


class InputError(LocalScoresError, ValueError):
    """Invalid argument: wrong shape, out-of-range parameter, malformed file."""


class UnsupportedError(LocalScoresError):
    """Requested operation is outside the supported envelope (e.g. space too
    large to enumerate, score kind without a closed form)."""


class InternalConsistencyError(LocalScoresError):
    """An internal invariant failed; signals a bug (e.g. a Bregman divergence
    evaluating below the negativity tolerance, which points at a gradient
    error rather than at user input)."""
