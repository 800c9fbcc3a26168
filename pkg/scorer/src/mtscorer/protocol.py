"""Wire protocol for the scorer bridge.

Line-delimited JSON, UTF-8. The server speaks first with a handshake record
``{"protocol_version": 1, "metrics_available": [...]}``; afterwards each
request line ``{"id", "metric", "source"?, "candidate", "reference"?}`` is
answered by exactly one response line, either ``{"id", "score"}`` or
``{"id", "error"}``. Responses may arrive in any order; clients reorder by
id. A malformed request line yields an error record with ``"id": null`` and
the loop continues.
"""

from __future__ import annotations

import json

PROTOCOL_VERSION = 1

METRIC_COMET22 = "comet22"
METRIC_COMETKIWI = "cometkiwi"
METRIC_BLEURT20 = "bleurt20"

ALL_METRICS = (METRIC_COMET22, METRIC_COMETKIWI, METRIC_BLEURT20)

#: metric -> (needs source, needs reference)
REQUIREMENTS: dict[str, tuple[bool, bool]] = {
    METRIC_COMET22: (True, True),
    METRIC_COMETKIWI: (True, False),
    METRIC_BLEURT20: (False, True),
}


def handshake_record(metrics: list[str], model_revisions: dict[str, str] | None = None) -> str:
    payload = {"protocol_version": PROTOCOL_VERSION, "metrics_available": list(metrics)}
    if model_revisions:
        payload["model_revisions"] = model_revisions
    return json.dumps(payload, ensure_ascii=False)


def validate_request(record: dict, metrics: list[str]) -> str | None:
    """Return an error message for a bad request, or None when usable."""
    if "id" not in record:
        return "request carries no id"
    metric = record.get("metric")
    if metric not in REQUIREMENTS:
        return f"unknown metric {metric!r}"
    if metric not in metrics:
        return f"metric {metric!r} is not loaded on this server"
    if not isinstance(record.get("candidate"), str):
        return "request carries no candidate text"
    needs_source, needs_reference = REQUIREMENTS[metric]
    if needs_source and not isinstance(record.get("source"), str):
        return f"{metric} requires a source"
    if needs_reference and not isinstance(record.get("reference"), str):
        return f"{metric} requires a reference"
    return None


def score_record(request_id, score: float) -> str:
    return json.dumps({"id": request_id, "score": score}, ensure_ascii=False)


def error_record(request_id, message: str) -> str:
    return json.dumps({"id": request_id, "error": message}, ensure_ascii=False)
