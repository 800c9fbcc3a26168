"""HTTP front end for preference sessions (stdlib, threading server).

Endpoints:

* ``POST /sessions`` — body ``{archive_a, archive_b, seed, annotators,
  labels?, allow_unknown_annotators?}`` (archive values are directory paths
  readable by the server) -> ``{session_id, task_count}``
* ``GET /sessions/{id}/next?annotator=…`` -> a task payload or ``{done: true}``
* ``POST /sessions/{id}/judgments`` — body ``{pair_id, choice, annotator_id}``
  -> ``{ok: true, progress}``
* ``GET /sessions/{id}/tally`` — admin token required (``X-Admin-Token``
  header) -> per-system counts after de-randomization

Annotator-facing responses never include the side map or system labels.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .corpus import MissingInputs, load_run
from .pref import (
    DuplicateJudgment,
    PreferenceJudgment,
    SegmentMismatch,
    SessionStore,
    UnknownAnnotator,
    UnknownSession,
    UnknownTask,
)

_SESSION_PATH = re.compile(r"^/sessions/([0-9a-f]+)/(next|judgments|tally)$")


class PrefApiHandler(BaseHTTPRequestHandler):
    # Injected by make_server(): store, admin_token
    store: SessionStore
    admin_token: str

    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # silence request logging in tests
        pass

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        return json.loads(raw.decode("utf-8"))

    def do_POST(self) -> None:
        try:
            url = urlparse(self.path)
            if url.path == "/sessions":
                self._create_session()
                return
            match = _SESSION_PATH.match(url.path)
            if match and match.group(2) == "judgments":
                self._submit_judgment(match.group(1))
                return
            self._reply(404, {"error": "unknown endpoint"})
        except json.JSONDecodeError:
            self._reply(400, {"error": "request body is not valid JSON"})
        except Exception as exc:  # defensive: a handler bug must not kill the server
            self._reply(500, {"error": str(exc)})

    def do_GET(self) -> None:
        try:
            url = urlparse(self.path)
            match = _SESSION_PATH.match(url.path)
            if match and match.group(2) == "next":
                self._next_task(match.group(1), parse_qs(url.query))
                return
            if match and match.group(2) == "tally":
                self._tally(match.group(1))
                return
            self._reply(404, {"error": "unknown endpoint"})
        except Exception as exc:
            self._reply(500, {"error": str(exc)})

    # -- endpoint bodies ----------------------------------------------------

    def _create_session(self) -> None:
        body = self._read_body()
        try:
            archive_a = load_run(body["archive_a"])
            archive_b = load_run(body["archive_b"])
            labels = tuple(body["labels"]) if body.get("labels") else None
            session_id, task_count = self.store.create_session(
                archive_a,
                archive_b,
                seed=int(body.get("seed", 0)),
                annotator_roster=list(body.get("annotators", [])),
                labels=labels,
                allow_unknown_annotators=bool(body.get("allow_unknown_annotators", True)),
            )
        except KeyError as exc:
            self._reply(400, {"error": f"missing field {exc}"})
            return
        except (SegmentMismatch, MissingInputs) as exc:
            self._reply(400, {"error": str(exc)})
            return
        self._reply(201, {"session_id": session_id, "task_count": task_count})

    def _next_task(self, session_id: str, query: dict) -> None:
        annotator = (query.get("annotator") or [""])[0]
        try:
            task = self.store.next_task(session_id, annotator)
            progress = self.store.progress(session_id, annotator)
        except UnknownSession as exc:
            self._reply(404, {"error": str(exc)})
            return
        except UnknownAnnotator as exc:
            self._reply(400, {"error": str(exc)})
            return
        payload = {"progress": {"done": progress.done, "total": progress.total}}
        if task is None:
            payload["done"] = True
        else:
            payload.update(
                {
                    "pair_id": task.pair_id,
                    "source_text": task.source_text,
                    "candidate_a": task.candidate_a,
                    "candidate_b": task.candidate_b,
                }
            )
        self._reply(200, payload)

    def _submit_judgment(self, session_id: str) -> None:
        body = self._read_body()
        try:
            judgment = PreferenceJudgment(
                pair_id=body["pair_id"],
                choice=body["choice"],
                annotator_id=body["annotator_id"],
            )
        except KeyError as exc:
            self._reply(400, {"error": f"missing field {exc}"})
            return
        try:
            progress = self.store.submit_judgment(session_id, judgment)
        except UnknownSession as exc:
            self._reply(404, {"error": str(exc)})
            return
        except UnknownTask as exc:
            self._reply(404, {"error": str(exc)})
            return
        except DuplicateJudgment as exc:
            self._reply(409, {"error": str(exc)})
            return
        except (UnknownAnnotator, ValueError) as exc:
            self._reply(400, {"error": str(exc)})
            return
        self._reply(200, {"ok": True, "progress": {"done": progress.done, "total": progress.total}})

    def _tally(self, session_id: str) -> None:
        token = self.headers.get("X-Admin-Token", "")
        if not self.admin_token or token != self.admin_token:
            self._reply(401, {"error": "admin token required"})
            return
        try:
            tally = self.store.tally(session_id)
        except UnknownSession as exc:
            self._reply(404, {"error": str(exc)})
            return
        self._reply(200, {"wins": tally.wins, "ties": tally.ties, "total": tally.total})


def make_server(store: SessionStore, admin_token: str, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port."""
    handler = type("BoundPrefApiHandler", (PrefApiHandler,), {"store": store, "admin_token": admin_token})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
