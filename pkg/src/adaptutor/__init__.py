"""Adaptive task assignment for hands-on, phase-structured trainings."""

from .model import (
    ParseError,
    TrainingDefinition,
    ValidationReport,
    Violation,
    dump_training_definition,
    load_training_definition,
    parse_training_definition,
    serialize_training_definition,
    validate,
)
from .tutor import (
    MetricVectors,
    PhaseOutcome,
    TaskAssignment,
    UnknownQuestionId,
    ZeroDenominator,
    assign_task,
    decide,
    derive_outcome_bits,
    evaluate_pretraining,
    performance,
)

__version__ = "0.1.0"

__all__ = [
    "MetricVectors",
    "ParseError",
    "PhaseOutcome",
    "TaskAssignment",
    "TrainingDefinition",
    "UnknownQuestionId",
    "ValidationReport",
    "Violation",
    "ZeroDenominator",
    "assign_task",
    "decide",
    "derive_outcome_bits",
    "dump_training_definition",
    "evaluate_pretraining",
    "load_training_definition",
    "parse_training_definition",
    "performance",
    "serialize_training_definition",
    "validate",
    "__version__",
]
