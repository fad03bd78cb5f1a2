"""Exception hierarchy shared by all modules.

Every error raised on purpose by this package derives from
:class:`ScenarioCoverageError`, so callers (and the CLI) can map failures to
exit codes without catching unrelated exceptions.
"""


class ScenarioCoverageError(Exception):
    """Base class for errors raised by scenario_coverage."""


class ContractViolation(ScenarioCoverageError, ValueError):
    """Inputs break an operation's preconditions (shape, sign, ordering)."""


class InsufficientDataError(ScenarioCoverageError, ValueError):
    """Too few observations to run the requested estimate."""


class FitError(ScenarioCoverageError, RuntimeError):
    """A saturation curve could not be fitted to the data."""


class InsufficientSignalError(FitError):
    """The curve shows no growth, so no saturation model is identifiable."""


class DomainError(ScenarioCoverageError, ValueError):
    """A value lies outside the domain on which a model is defined."""


class UnreachableTargetError(DomainError):
    """A coverage target at or above the model's asymptote was requested."""


class ExtrapolationError(DomainError):
    """A lookup was requested below the smallest measured input count."""


class MetamodelFitError(ScenarioCoverageError, RuntimeError):
    """Fitting a generation meta model aborted part-way through the grid.

    Attributes:
        partial: list of ``(input_count, error_rate, model)`` entries that
            completed before the failure.
    """

    def __init__(self, message, partial=()):
        super().__init__(message)
        self.partial = list(partial)
