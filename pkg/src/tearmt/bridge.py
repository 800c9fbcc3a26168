"""Client for the neural-metric scorer bridge.

Wire protocol (line-delimited JSON, UTF-8):

* server greets with a handshake record
  ``{"protocol_version": 1, "metrics_available": [...]}``;
* each request is ``{"id": ..., "metric": ..., "source"?: ..., "candidate":
  ..., "reference"?: ...}``;
* each response is ``{"id": ..., "score": ...}`` or ``{"id": ..., "error":
  ...}``, in any order — the client reorders by id.

The bridge runs either as a subprocess on standard streams or behind a TCP
socket. Scores are cached by content digest exactly like gateway responses.
"""

from __future__ import annotations

import hashlib
import json
import socket
import subprocess
from dataclasses import dataclass

from .core import TearError

PROTOCOL_VERSION = 1

METRIC_COMET22 = "comet22"
METRIC_COMETKIWI = "cometkiwi"
METRIC_BLEURT20 = "bleurt20"

#: metric -> (needs source, needs reference)
METRIC_REQUIREMENTS: dict[str, tuple[bool, bool]] = {
    METRIC_COMET22: (True, True),
    METRIC_COMETKIWI: (True, False),
    METRIC_BLEURT20: (False, True),
}


class BridgeUnavailable(TearError):
    """The bridge endpoint cannot be reached or died mid-conversation."""


class ProtocolError(TearError):
    """A record violates the bridge protocol; carries the offending record."""


@dataclass(frozen=True)
class ScoreItem:
    candidate: str
    source: str | None = None
    reference: str | None = None


def item_digest(metric: str, item: ScoreItem) -> str:
    payload = {
        "metric": metric,
        "source": item.source,
        "candidate": item.candidate,
        "reference": item.reference,
    }
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def check_item(metric: str, item: ScoreItem) -> None:
    """Pre-flight validation so protocol violations never reach the wire."""
    if metric not in METRIC_REQUIREMENTS:
        raise ProtocolError(f"unknown metric {metric!r}")
    needs_source, needs_reference = METRIC_REQUIREMENTS[metric]
    if needs_source and item.source is None:
        raise ProtocolError(f"{metric} requires a source; offending item: {item}")
    if needs_reference and item.reference is None:
        raise ProtocolError(f"{metric} requires a reference; offending item: {item}")


class _SubprocessTransport:
    def __init__(self, command: list[str]):
        try:
            self._proc = subprocess.Popen(
                command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise BridgeUnavailable(f"cannot start scorer bridge {command!r}: {exc}") from exc

    def send_line(self, line: str) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise BridgeUnavailable(f"scorer bridge went away: {exc}") from exc

    def read_line(self) -> str:
        assert self._proc.stdout is not None
        line = self._proc.stdout.readline()
        if not line:
            raise BridgeUnavailable("scorer bridge closed its output stream")
        return line.rstrip("\n")

    def close(self) -> None:
        if self._proc.stdin:
            self._proc.stdin.close()
        self._proc.wait(timeout=10)


class _TcpTransport:
    def __init__(self, host: str, port: int):
        try:
            self._sock = socket.create_connection((host, port), timeout=30)
        except OSError as exc:
            raise BridgeUnavailable(f"cannot connect to scorer bridge at {host}:{port}: {exc}") from exc
        self._reader = self._sock.makefile("r", encoding="utf-8")
        self._writer = self._sock.makefile("w", encoding="utf-8")

    def send_line(self, line: str) -> None:
        try:
            self._writer.write(line + "\n")
            self._writer.flush()
        except OSError as exc:
            raise BridgeUnavailable(f"scorer bridge went away: {exc}") from exc

    def read_line(self) -> str:
        line = self._reader.readline()
        if not line:
            raise BridgeUnavailable("scorer bridge closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        self._reader.close()
        self._writer.close()
        self._sock.close()


class ScorerBridge:
    """Batched scoring client with a per-content-digest cache."""

    def __init__(self, transport) -> None:
        self._transport = transport
        self._cache: dict[str, float] = {}
        self.handshake = self._read_handshake()

    @classmethod
    def spawn(cls, command: list[str]) -> "ScorerBridge":
        return cls(_SubprocessTransport(command))

    @classmethod
    def connect(cls, host: str, port: int) -> "ScorerBridge":
        return cls(_TcpTransport(host, port))

    def _read_handshake(self) -> dict:
        line = self._transport.read_line()
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"handshake is not valid JSON: {line!r}") from exc
        if record.get("protocol_version") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version in handshake: {record!r}")
        return record

    @property
    def metrics_available(self) -> list[str]:
        return list(self.handshake.get("metrics_available", []))

    def score(self, metric: str, items: list[ScoreItem]) -> list[float]:
        """One score per item, input order preserved; repeats hit the cache."""
        for item in items:
            check_item(metric, item)

        digests = [item_digest(metric, item) for item in items]
        pending: dict[str, ScoreItem] = {}
        for digest, item in zip(digests, items):
            if digest not in self._cache and digest not in pending:
                pending[digest] = item

        if pending:
            for digest, item in pending.items():
                request = {"id": digest, "metric": metric, "candidate": item.candidate}
                if item.source is not None:
                    request["source"] = item.source
                if item.reference is not None:
                    request["reference"] = item.reference
                self._transport.send_line(json.dumps(request, ensure_ascii=False))
            remaining = set(pending)
            while remaining:
                line = self._transport.read_line()
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"response is not valid JSON: {line!r}") from exc
                rid = record.get("id")
                if rid not in remaining:
                    raise ProtocolError(f"response for unknown or duplicate id: {record!r}")
                if "error" in record:
                    raise ProtocolError(f"bridge error for {rid}: {record!r}")
                if not isinstance(record.get("score"), (int, float)):
                    raise ProtocolError(f"response carries no numeric score: {record!r}")
                self._cache[rid] = float(record["score"])
                remaining.discard(rid)

        return [self._cache[digest] for digest in digests]

    def close(self) -> None:
        self._transport.close()


def score_with_bridge(metric: str, items: list[ScoreItem], bridge: ScorerBridge) -> list[float]:
    """Module-level convenience wrapper around :meth:`ScorerBridge.score`."""
    return bridge.score(metric, items)
