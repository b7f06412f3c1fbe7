"""Exception hierarchy. ``DomainError`` subclasses map to CLI exit status 1."""


class QuasilevelError(Exception):
    pass


class DomainError(QuasilevelError):
    pass


class ConfigError(QuasilevelError):
    pass


class AmbiguousAtBound(DomainError):
    pass


class NotFound(DomainError):
    pass


class WindowBoundaryHit(DomainError):
    pass


class NoUnimodularRoot(DomainError):
    pass


class NearCriticalLevel(DomainError):
    def __init__(self, msg, point=None, value=None):
        super().__init__(msg)
        self.point = point
        self.value = value


class CriticalValue(DomainError):
    def __init__(self, c, nearest):
        super().__init__(f"level {c!r} is within tolerance of critical value {nearest!r}")
        self.c = c
        self.nearest = nearest


class TooShort(DomainError):
    pass


class NonIntegralClass(DomainError):
    pass


class DegenerateSingularity(DomainError):
    pass


class InconsistentDecomposition(DomainError):
    """Carrier genera or classes break the integrality constraints at this resolution."""


class GenericityViolated(DomainError):
    pass


class SaddleToSaddleDifferent(GenericityViolated):
    pass


class NonConnectedInterval(GenericityViolated):
    pass


class EmptyTarget(DomainError):
    pass


class UnstableComponentClassification(DomainError):
    pass


class CaseDegenerate(DomainError):
    pass


class NoNontrivialBaseCircle(DomainError):
    pass


class ViolationFound(DomainError):
    def __init__(self, msg, offset=None, trajectory=None):
        super().__init__(msg)
        self.offset = offset
        self.trajectory = trajectory


class UnrenderableRecordKind(QuasilevelError):
    pass
