"""Exception and warning classes raised across the package."""


class TauStatError(Exception):
    """Base class for all package errors."""


class ValidationError(TauStatError, ValueError):
    """Input data or configuration failed validation."""


class EmptyOrSingleton(ValidationError):
    pass


class NonFiniteField(ValidationError):
    pass


class DuplicateId(ValidationError):
    pass


class DegenerateBackgroundOdds(TauStatError):
    """The all-distance odds are zero or undefined.

    Raised when the relatedness rule relates none (or all) of the case
    pairs, so that no tau value can be formed.
    """


class OutOfRange(TauStatError, ValueError):
    pass


class UndefinedNeighbor(TauStatError):
    pass


class MismatchedBandSets(TauStatError, ValueError):
    pass


class InsufficientSims(TauStatError, ValueError):
    pass


class TooFewReplicates(TauStatError, ValueError):
    pass


class TooFewValues(TauStatError, ValueError):
    pass


class NoCrossings(TauStatError):
    pass


class NoInhibition(TauStatError):
    pass


class MissingColumn(ValidationError):
    pass


class UnparseableRow(ValidationError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class WorkflowGateError(TauStatError):
    """Range estimation was requested without evidence of clustering."""


class TauStatWarning(UserWarning):
    pass


class DegenerateBias(TauStatWarning):
    """BCa bias correction is infinite; a percentile interval was returned."""


class ProportionUsedWarning(TauStatWarning):
    pass


class BimodalityWarning(TauStatWarning):
    pass


class NotRecommendedWarning(TauStatWarning):
    pass


class UndefinedBandWarning(TauStatWarning):
    pass
