"""Exception hierarchy shared by every module of the engine."""


class AttributionError(Exception):
    """Base class for all errors raised by shapattr."""


class EvaluationError(AttributionError):
    """A model could not be evaluated, typically because a feature is missing."""


class LookupMissError(EvaluationError):
    """A lookup-table model has no row for the input and no default."""


class DomainError(EvaluationError):
    """Division by zero, square root of a negative number, and similar."""


class CapabilityError(AttributionError):
    """The requested operation is not supported by this model variant."""


class ParseError(AttributionError):
    """Malformed expression, model JSON, distribution JSON or CSV input."""


class ConstructionError(AttributionError):
    """A dataset, distribution or predicate violates its invariants."""


class ConditioningError(AttributionError):
    """Conditioning on an event of zero probability."""


class SizeError(AttributionError):
    """A configured cap on players, support atoms or grid points was exceeded."""


class InvalidSetFunctionError(AttributionError):
    """A set function returned the invalid marker where a real was required."""


class ReductionError(AttributionError):
    """The cost-sharing reduction found an unbounded or undefined derivative."""


class InstanceError(AttributionError):
    """An axiom check instance has an antecedent that cannot be verified."""


class PreconditionError(AttributionError):
    """An input precondition (e.g. possible explicand and baseline) fails."""


class UnknownScenarioError(AttributionError, LookupError):
    """Scenario name not in the registry."""
