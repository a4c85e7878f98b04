"""Exception types raised across the package."""


class CConvexError(Exception):
    """Base class for all package errors."""


class NonFinite(CConvexError, ValueError):
    pass


class DegenerateBody(CConvexError):
    pass


class NoConvergence(CConvexError):
    pass


class PointOutside(CConvexError):
    pass


class NoWitness(CConvexError):
    pass


class NotAVertex(CConvexError):
    pass


class NotExposed(CConvexError):
    pass


class UnboundedDual(UserWarning):
    """Warning: the polar dual was clipped to the bounding box."""


class SingularPair(CConvexError, ValueError):
    pass


class DegeneratePair(CConvexError):
    pass


class OutsideDomain(CConvexError):
    pass


class FDUnstable(CConvexError):
    pass


class EmptySet(CConvexError):
    pass


class EmptyBoundary(CConvexError):
    pass


class EmptyAdmissible(CConvexError):
    pass


class DilationEscapes(CConvexError):
    pass


class EmptySection(CConvexError):
    pass


class NotCompactlyContained(CConvexError):
    pass


class DegenerateSection(CConvexError):
    pass


class DomainMarginExhausted(CConvexError):
    pass


class BandEmpty(CConvexError):
    pass


class NoUniqueMaximizer(CConvexError):
    pass


class MassMismatch(CConvexError):
    pass


class NondifferentiablePoint(CConvexError):
    pass


class ConfigError(CConvexError, ValueError):
    pass
