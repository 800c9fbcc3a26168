"""Request/response loop for the scorer bridge.

The loop is transport-agnostic: anything with readable/writable line streams
works, so the same code serves stdio and TCP. Requests are answered exactly
once each; malformed input produces an error record and the loop continues.
Only endpoint loss ends a serving session.
"""

from __future__ import annotations

import json
import socketserver
import sys

from .protocol import error_record, handshake_record, score_record, validate_request
from .scoring import MODEL_REVISIONS, RealScorer


def serve_streams(scorer, reader, writer, metrics: list[str] | None = None) -> int:
    """Drive one session over text streams; returns the request count."""
    metrics = list(metrics if metrics is not None else scorer.metrics)
    revisions = MODEL_REVISIONS if isinstance(scorer, RealScorer) else None
    writer.write(handshake_record(metrics, revisions) + "\n")
    writer.flush()

    handled = 0
    for line in reader:
        line = line.strip()
        if not line:
            continue
        handled += 1
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            writer.write(error_record(None, "malformed request line") + "\n")
            writer.flush()
            continue
        if not isinstance(record, dict):
            writer.write(error_record(None, "request must be a JSON object") + "\n")
            writer.flush()
            continue
        problem = validate_request(record, metrics)
        if problem is not None:
            writer.write(error_record(record.get("id"), problem) + "\n")
            writer.flush()
            continue
        try:
            (score,) = scorer.score_batch(record["metric"], [record])
            writer.write(score_record(record["id"], score) + "\n")
        except Exception as exc:  # per-request failure must not kill the loop
            writer.write(error_record(record.get("id"), f"scoring failed: {exc}") + "\n")
        writer.flush()
    return handled


def serve_stdio(scorer, metrics: list[str] | None = None) -> int:
    return serve_streams(scorer, sys.stdin, sys.stdout, metrics)


def serve_tcp(scorer, host: str, port: int, metrics: list[str] | None = None, max_sessions: int | None = None):
    """Serve TCP clients one at a time; ``max_sessions`` bounds test runs."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            reader = (raw.decode("utf-8") for raw in self.rfile)

            class _W:
                def write(inner, text: str) -> None:
                    self.wfile.write(text.encode("utf-8"))

                def flush(inner) -> None:
                    self.wfile.flush()

            serve_streams(scorer, reader, _W(), metrics)

    with socketserver.TCPServer((host, port), Handler) as server:
        server.allow_reuse_address = True
        if max_sessions is None:
            server.serve_forever()
        else:
            for _ in range(max_sessions):
                server.handle_request()
        return server.server_address
