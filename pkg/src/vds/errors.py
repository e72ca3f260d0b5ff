"""Typed errors raised across the package."""


class VdsError(Exception):
    """Base class for all package errors."""


class PoleProximity(VdsError):
    """Evaluation point lies within the guard distance of a pole."""


class NonConvergent(VdsError):
    """A product or series did not reach the requested accuracy."""


class OutOfRange(VdsError):
    """An integer index is outside its admissible range."""


class DomainError(VdsError):
    """A coupling or parameter is outside the required domain."""


class RatioGuard(VdsError):
    """The shift ratio a_s/a_l is one of the excluded values."""


class OutOfStrip(VdsError):
    """A continuation point lies outside the cut strip of validity."""


class CriticalPole(VdsError):
    """A continuation point hits a critical pole of the residue terms."""


class ContinuationFailure(VdsError):
    """Analytic continuation of an eigenfunction failed."""


class NearNodeZero(VdsError):
    """An eigenfunction value used as a divisor is too small."""


class IllConditioned(VdsError):
    """Requested modes exceed the resolved rank of a decomposition."""


class LossOfOrthogonality(VdsError):
    """A computed basis failed its Gram-matrix check."""


class OrbitEscapesDomain(VdsError):
    """A Weyl-word image left the admissible parameter domain."""


class ConfigError(VdsError):
    """An experiment configuration is invalid."""
