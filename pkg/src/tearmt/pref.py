"""File-backed pairwise preference sessions.

A session pairs the outputs of two run archives over identical segments,
randomizes which system appears as candidate A per pair, and collects blinded
A/B/tie judgments into an append-only log. The side map stays server-side;
annotator-facing payloads never carry system identities.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from .core import TearError
from .corpus import MissingInputs, RunArchive
from .metrics import WinTieLoss, win_tie_loss


class SegmentMismatch(TearError):
    pass


class UnknownSession(TearError):
    pass


class UnknownTask(TearError):
    pass


class DuplicateJudgment(TearError):
    pass


class UnknownAnnotator(TearError):
    pass


@dataclass(frozen=True)
class PreferenceTask:
    pair_id: str
    source_text: str
    candidate_a: str
    candidate_b: str


@dataclass(frozen=True)
class PreferenceJudgment:
    pair_id: str
    choice: str  # A | B | tie
    annotator_id: str
    timestamp: float = 0.0


@dataclass(frozen=True)
class Progress:
    done: int
    total: int


class SessionStore:
    """Desk-scale session persistence: one directory per session.

    `session.json` holds tasks, the side map, and the roster; judgments go to
    an append-only JSONL log that is fsynced before a submission is acked, so
    an acked judgment survives a crash or restart.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    # -- creation ---------------------------------------------------------

    def create_session(
        self,
        archive_a: RunArchive,
        archive_b: RunArchive,
        seed: int,
        annotator_roster: list[str],
        labels: tuple[str, str] | None = None,
        allow_unknown_annotators: bool = True,
    ) -> tuple[str, int]:
        """Build one task per shared segment; returns (session id, task count)."""
        finals_a = {r.segment_id: r.final_text for r in archive_a.records}
        finals_b = {r.segment_id: r.final_text for r in archive_b.records}
        if set(finals_a) != set(finals_b):
            only_a = sorted(set(finals_a) - set(finals_b))[:5]
            only_b = sorted(set(finals_b) - set(finals_a))[:5]
            raise SegmentMismatch(f"archives cover different segments (a-only {only_a}, b-only {only_b})")

        sources = archive_a.extras.get("sources") or archive_b.extras.get("sources")
        if not sources:
            raise MissingInputs("archives carry no extras['sources']; cannot build annotation tasks")

        label_a, label_b = labels or (
            archive_a.manifest.get("label") or "system_a",
            archive_b.manifest.get("label") or "system_b",
        )
        if label_a == label_b:
            label_a, label_b = f"{label_a}#a", f"{label_b}#b"

        rng = random.Random(seed)
        tasks = []
        side_map = {}
        for pair_id in sorted(finals_a):
            a_first = rng.random() < 0.5
            shown_a, shown_b = (label_a, label_b) if a_first else (label_b, label_a)
            text_a = finals_a[pair_id] if a_first else finals_b[pair_id]
            text_b = finals_b[pair_id] if a_first else finals_a[pair_id]
            tasks.append(
                {
                    "pair_id": pair_id,
                    "source_text": sources.get(pair_id, ""),
                    "candidate_a": text_a,
                    "candidate_b": text_b,
                }
            )
            side_map[pair_id] = [shown_a, shown_b]

        session_id = uuid.uuid4().hex[:12]
        session_dir = self.root / session_id
        session_dir.mkdir(parents=True)
        manifest = {
            "id": session_id,
            "seed": seed,
            "labels": [label_a, label_b],
            "roster": list(annotator_roster),
            "allow_unknown_annotators": allow_unknown_annotators,
            "tasks": tasks,
            "side_map": side_map,
        }
        (session_dir / "session.json").write_text(
            json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )
        (session_dir / "judgments.jsonl").touch()
        return session_id, len(tasks)

    # -- access -----------------------------------------------------------

    def _session_dir(self, session_id: str) -> Path:
        session_dir = self.root / session_id
        if not (session_dir / "session.json").exists():
            raise UnknownSession(f"no session {session_id!r}")
        return session_dir

    def _manifest(self, session_id: str) -> dict:
        return json.loads((self._session_dir(session_id) / "session.json").read_text("utf-8"))

    def _judgments(self, session_id: str) -> list[PreferenceJudgment]:
        log = self._session_dir(session_id) / "judgments.jsonl"
        judgments = []
        for line in log.read_text("utf-8").splitlines():
            if line.strip():
                payload = json.loads(line)
                judgments.append(
                    PreferenceJudgment(
                        pair_id=payload["pair_id"],
                        choice=payload["choice"],
                        annotator_id=payload["annotator_id"],
                        timestamp=payload.get("ts", 0.0),
                    )
                )
        return judgments

    def _check_annotator(self, manifest: dict, annotator: str) -> None:
        if not annotator:
            raise UnknownAnnotator("annotator id must be non-empty")
        if annotator not in manifest["roster"] and not manifest["allow_unknown_annotators"]:
            raise UnknownAnnotator(f"annotator {annotator!r} is not on the roster")

    def progress(self, session_id: str, annotator: str) -> Progress:
        manifest = self._manifest(session_id)
        done = sum(1 for j in self._judgments(session_id) if j.annotator_id == annotator)
        return Progress(done=done, total=len(manifest["tasks"]))

    def next_task(self, session_id: str, annotator: str) -> PreferenceTask | None:
        """First unjudged task in this annotator's seeded shuffle order."""
        manifest = self._manifest(session_id)
        self._check_annotator(manifest, annotator)
        judged = {j.pair_id for j in self._judgments(session_id) if j.annotator_id == annotator}
        order = list(range(len(manifest["tasks"])))
        random.Random(f"{manifest['seed']}:{annotator}").shuffle(order)
        for index in order:
            task = manifest["tasks"][index]
            if task["pair_id"] not in judged:
                return PreferenceTask(
                    pair_id=task["pair_id"],
                    source_text=task["source_text"],
                    candidate_a=task["candidate_a"],
                    candidate_b=task["candidate_b"],
                )
        return None

    def submit_judgment(self, session_id: str, judgment: PreferenceJudgment) -> Progress:
        manifest = self._manifest(session_id)
        self._check_annotator(manifest, judgment.annotator_id)
        if judgment.choice not in ("A", "B", "tie"):
            raise ValueError(f"choice must be A, B, or tie, got {judgment.choice!r}")
        known = {task["pair_id"] for task in manifest["tasks"]}
        if judgment.pair_id not in known:
            raise UnknownTask(f"session {session_id} has no task {judgment.pair_id!r}")

        with self._write_lock:
            for existing in self._judgments(session_id):
                if existing.annotator_id == judgment.annotator_id and existing.pair_id == judgment.pair_id:
                    raise DuplicateJudgment(
                        f"annotator {judgment.annotator_id!r} already judged pair {judgment.pair_id!r}"
                    )
            payload = {
                "pair_id": judgment.pair_id,
                "choice": judgment.choice,
                "annotator_id": judgment.annotator_id,
                "ts": judgment.timestamp or time.time(),
            }
            log = self._session_dir(session_id) / "judgments.jsonl"
            with open(log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return self.progress(session_id, judgment.annotator_id)

    def tally(self, session_id: str) -> WinTieLoss:
        """Server-side de-randomization of every stored judgment."""
        manifest = self._manifest(session_id)
        side_map = {pair_id: tuple(sides) for pair_id, sides in manifest["side_map"].items()}
        return win_tie_loss(self._judgments(session_id), side_map)

    def side_map(self, session_id: str) -> dict[str, tuple[str, str]]:
        manifest = self._manifest(session_id)
        return {pair_id: tuple(sides) for pair_id, sides in manifest["side_map"].items()}
