"""Exception hierarchy.

Errors split into two families so callers (and the CLI exit-code mapping) can
tell bad input apart from a numerical failure inside an estimator.
"""


class DTRError(Exception):
    """Base class for all package errors."""


class ValidationError(DTRError, ValueError):
    """Input data, configuration or arguments are unusable."""


class NumericalError(DTRError, ArithmeticError):
    """An estimation kernel could not produce a valid result."""


# -- input / validation -----------------------------------------------------

class MissingColumn(ValidationError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing column {name!r}")

    def __str__(self):
        return self.args[0]


class ParseError(ValidationError):
    def __init__(self, row, column, token=None):
        self.row = row
        self.column = column
        self.token = token
        msg = f"cannot parse row {row}, column {column!r}"
        if token is not None:
            msg += f": {token!r}"
        super().__init__(msg)


class EmptyFile(ValidationError):
    pass


class InvalidData(ValidationError):
    pass


class TermSyntaxError(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class StageOrderError(ValidationError):
    pass


class InvalidTreatment(ValidationError):
    pass


class InvalidTreatmentWeights(ValidationError):
    pass


class NegativeWeight(ValidationError):
    pass


class MissingClass(ValidationError):
    """A binary model was asked to fit data containing a single class."""


class MissingCategory(ValidationError):
    def __init__(self, category):
        self.category = category
        super().__init__(f"treatment category {category} has no observations")


class OutOfSupport(ValidationError):
    pass


class NoValidationSubsample(ValidationError):
    pass


class PreconditionError(ValidationError):
    pass


class UnknownScenario(ValidationError):
    pass


class ConfigError(ValidationError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaMismatch(ValidationError):
    pass


# -- numerical ----------------------------------------------------------------

class SingularDesign(NumericalError):
    pass


class SeparationDetected(NumericalError):
    pass


class NonpositiveSd(NumericalError):
    pass


class DegenerateGps(NonpositiveSd):
    """Residual spread of the dose model is zero, so the density is undefined."""


class DomainError(NumericalError):
    def __init__(self, term, row):
        self.term = term
        self.row = row
        super().__init__(f"term {term} undefined at row {row}")


class ProbabilityOutOfRange(NumericalError):
    pass


class NonpositiveDensity(NumericalError):
    pass


class ConcavityViolation(NumericalError):
    pass


class NonpositiveSurvivalTime(NumericalError):
    pass


class ProbabilityOverflow(NumericalError):
    pass


class MissingCovariance(NumericalError):
    pass


class ResampleFitFailure(NumericalError):
    def __init__(self, count, total):
        self.count = count
        self.total = total
        super().__init__(f"{count} of {total} bootstrap refits failed")


class NearDegenerateWeight(UserWarning):
    """Warning category: a weight correction factor underflowed."""
