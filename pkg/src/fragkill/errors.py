"""Exception hierarchy shared across the package.

Grouped by how the CLI maps them to exit codes: configuration problems,
numerical failures, resource caps, and statistical check failures.
"""


class FragkillError(Exception):
    """Base class for all package errors."""


# ---- configuration / input validation (CLI exit 1) ----

class ConfigError(FragkillError):
    """Malformed or inconsistent configuration input."""


class NegativePart(ConfigError):
    """A mass partition contains a negative entry."""


class SumExceedsOne(ConfigError):
    """Partition masses sum to more than 1 beyond tolerance."""


class NonFinite(ConfigError):
    """A partition contains NaN or infinite entries."""


class EmptyMeasure(ConfigError):
    """Dislocation measure has no atoms."""


class ForbiddenAtom(ConfigError):
    """Atom violates admissibility (unit partition or single-block split)."""


class NonPositiveWeight(ConfigError):
    """Atom weight is zero or negative."""


# ---- numerical failures (CLI exit 2) ----

class NumericError(FragkillError):
    """Base class for numerical failures."""


class DomainError(NumericError):
    """Argument outside the domain of a spectral quantity."""


class BracketFailure(NumericError):
    """Root bracketing failed; the measure is pathological."""


class DriftTooSmall(NumericError):
    """Barrier drift does not exceed the tilted mean jump rate."""


class NoConvergence(NumericError):
    """Iterative scheme hit its term limit without converging."""


class GridRange(NumericError):
    """Query outside the tabulated grid."""


# ---- resource caps (CLI exit 3) ----

class CapExceeded(FragkillError):
    """Population cap was hit and the cap is configured as hard."""


# ---- statistical failures (CLI exit 4) ----

class InsufficientSurvivors(FragkillError):
    """Too few surviving paths to form a conditional estimate."""


class StatCheckFailure(FragkillError):
    """A hard statistical acceptance check failed."""
