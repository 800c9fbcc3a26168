"""Self-refining machine translation pipeline and its evaluation apparatus."""

from .core import (
    Decoding,
    Exemplar,
    ExemplarSet,
    LanguagePair,
    RunConfig,
    Segment,
    TranslationDraft,
    validate_run_config,
)
from .mqm import (
    ErrorAnnotation,
    ErrorCategory,
    EstimationResult,
    MQMScore,
    mqm_score,
    parse_estimation,
    serialize_feedback,
)
from .orchestrator import Orchestrator, TearRecord

__all__ = [
    "Decoding",
    "ErrorAnnotation",
    "ErrorCategory",
    "EstimationResult",
    "Exemplar",
    "ExemplarSet",
    "LanguagePair",
    "MQMScore",
    "Orchestrator",
    "RunConfig",
    "Segment",
    "TearRecord",
    "TranslationDraft",
    "mqm_score",
    "parse_estimation",
    "serialize_feedback",
    "validate_run_config",
]

__version__ = "0.1.0"
