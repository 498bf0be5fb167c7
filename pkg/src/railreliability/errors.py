"""Exception types shared across the package."""


class RailReliabilityError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_json_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": self.context}


class MissingDataError(RailReliabilityError):
    """A required value (timestamp, column, file) is absent."""

    code = "missing_data"


class DataIntegrityError(RailReliabilityError):
    """Input data contradicts itself, e.g. duplicate keys with conflicting values."""

    code = "data_integrity"


class SchemaError(RailReliabilityError):
    """Input does not match the declared schema (columns, feature layout)."""

    code = "schema"


class DegenerateLabelsError(RailReliabilityError):
    """Classifier training data contains a single class."""

    code = "degenerate_labels"


class DomainError(RailReliabilityError):
    """A value lies outside the mathematical domain of an operation."""

    code = "domain"


class UndefinedMetricError(RailReliabilityError):
    """The requested metric is undefined for the given inputs."""

    code = "undefined_metric"


class InsufficientDataError(RailReliabilityError):
    """Not enough observations to compute the requested quantity."""

    code = "insufficient_data"


class ModelNotAcceptedError(RailReliabilityError):
    """Convergence diagnostics rejected the fitted model."""

    code = "model_not_accepted"
