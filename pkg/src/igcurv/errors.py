"""Exception hierarchy shared by every module."""


class IgcurvError(Exception):
    """Base class for all package errors."""


class DomainEscape(IgcurvError):
    """A finite-difference stencil point left the chart domain."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = None if point is None else tuple(float(x) for x in point)


class SingularMetric(IgcurvError):
    """The metric determinant is numerically zero."""


class AsymmetricMetric(IgcurvError):
    """The metric components are not symmetric."""


class DimensionMismatch(IgcurvError):
    """Objects of different chart dimensions were combined."""


class VarianceMismatch(IgcurvError):
    """A contraction was requested on slots of the wrong variance."""


class CubicSymmetryViolation(IgcurvError):
    """A cubic tensor broke a required index symmetry."""

    def __init__(self, message, triple=None, magnitude=None):
        super().__init__(message)
        self.triple = triple
        self.magnitude = magnitude


class NonpositiveVolume(IgcurvError):
    """A volume density was not strictly positive."""


class KindMismatch(IgcurvError):
    """An operation was applied to a bundle of the wrong kind."""


class AlphaSingular(IgcurvError):
    """The requested alpha makes a formula singular."""


class NonpositiveParameter(IgcurvError):
    """A builder parameter that must be positive was not."""


class GenerationFailure(IgcurvError):
    """A random generator could not produce a valid bundle."""


class ParseError(IgcurvError):
    """A manifold document could not be parsed."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class ValidationError(IgcurvError):
    """A manifold document parsed but failed an invariant."""

    def __init__(self, invariant, detail=""):
        text = invariant if not detail else f"{invariant}: {detail}"
        super().__init__(text)
        self.invariant = invariant
