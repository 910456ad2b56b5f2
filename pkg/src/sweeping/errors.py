"""Exception hierarchy shared by all modules."""


class SweepingError(Exception):
    """Base class for every error raised by this package."""


class AmbiguousProjection(SweepingError):
    """The nearest point is not unique at the working tolerance."""


class OutsideProxNeighborhood(SweepingError):
    """Point lies outside the neighborhood where projection is single-valued."""


class NormalGenerationFailure(SweepingError):
    pass


class OutOfRange(SweepingError):
    pass


class KernelEvaluationFailure(SweepingError):
    pass


class StepTooLarge(SweepingError):
    pass


class NonConvergence(SweepingError):
    """An iteration hit its budget. ``report`` carries the diagnostics."""

    def __init__(self, message, report=None, trajectory=None, bounds=None):
        super().__init__(message)
        self.report = report
        self.trajectory = trajectory
        self.bounds = bounds


class InvalidGain(SweepingError, ValueError):
    pass


class SingularFactor(SweepingError):
    pass


class InversionNonConvergence(SweepingError):
    pass


class ConfigError(SweepingError):
    pass
