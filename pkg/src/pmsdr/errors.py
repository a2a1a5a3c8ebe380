"""Exception hierarchy shared by every stage."""


class PMSDRError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(PMSDRError, ValueError):
    pass


class RankError(PMSDRError, ValueError):
    pass


class DimensionError(PMSDRError, ValueError):
    pass


class ConstraintError(PMSDRError, ValueError):
    pass


class ConfigError(PMSDRError, ValueError):
    pass


class DomainError(PMSDRError, ValueError):
    pass


class ConvergenceError(PMSDRError, RuntimeError):
    """Raised when the elastic-net solver exhausts its sweep budget.

    ``kkt`` holds the last KKT residual and ``columns`` the failing column
    indices (a single entry for a one-column solve).
    """

    def __init__(self, message, kkt=float("nan"), columns=()):
        super().__init__(message)
        self.kkt = kkt
        self.columns = tuple(columns)


class NoGapError(PMSDRError, ValueError):
    pass


class InsufficientData(PMSDRError, ValueError):
    pass


class ClusteringError(PMSDRError, RuntimeError):
    pass


class DegenerateCluster(PMSDRError, ValueError):
    pass


class ScheduleError(PMSDRError, ValueError):
    pass


class RecoveryError(PMSDRError, RuntimeError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class DegenerateError(PMSDRError, ValueError):
    pass


class StageError(PMSDRError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
