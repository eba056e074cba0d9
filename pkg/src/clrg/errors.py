"""Exception hierarchy.

Every error raised by the library derives from :class:`ClrgError`, which is a
``ValueError`` so that callers treating bad numerical input generically keep
working.  Messages name the modelling assumption that failed.
"""


class ClrgError(ValueError):
    """Base class for validation and numerical errors."""


class DimensionMismatch(ClrgError):
    pass


class NotPositiveDefinite(ClrgError):
    """A second-moment matrix failed the positive-definite regularity check."""


class EmptySample(ClrgError):
    pass


class InvalidEnvIndex(ClrgError):
    pass


class NotOrthogonal(ClrgError):
    pass


class AntiCausalPresent(ClrgError):
    """A confounder-only formula was requested for an environment with alpha != 0."""


class RealizabilityViolated(ClrgError):
    """A least-squares coefficient lies outside the strategy box."""


class HypothesisViolated(ClrgError):
    pass


class EmptyVSet(ClrgError):
    """No coordinate differs across environments, so the round bound is undefined."""
