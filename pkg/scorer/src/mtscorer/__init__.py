"""Neural MT metric scoring bridge."""

from .protocol import ALL_METRICS, PROTOCOL_VERSION
from .scoring import ModelUnavailable, RealScorer, StubScorer

__all__ = ["ALL_METRICS", "PROTOCOL_VERSION", "ModelUnavailable", "RealScorer", "StubScorer"]

__version__ = "0.1.0"
