"""Shared test helpers: scripted mock providers and small corpora."""

from __future__ import annotations

import re

import pytest

from tearmt.core import Exemplar, ExemplarSet, LanguagePair, Segment
from tearmt.gateway import CompletionRequest, Gateway, MockProvider

ZH_EN = LanguagePair("zh", "en")

NO_ERROR_FEEDBACK = "critical: no-error\nmajor: no-error\nminor: no-error"
ONE_MINOR_FEEDBACK = 'critical: no-error\nmajor: no-error\nminor: style/awkward - "clunky phrasing"'
ONE_MAJOR_FEEDBACK = 'critical: no-error\nmajor: accuracy/mistranslation - "wrong word"\nminor: no-error'

_SEGMENT_TOKEN = re.compile(r"\bseg-(\w+)\b")
_ESTIMATE_TAIL = re.compile(r"translation: (.*)\nMQM annotations:$", re.DOTALL)
_REFINE_TARGET = re.compile(r"\nTarget: (.*)\nI'm not satisfied", re.DOTALL)


def make_segments(n: int, pair: LanguagePair = ZH_EN) -> list[Segment]:
    """Segments whose sources carry a `seg-<id>` token the mock can key on."""
    return [
        Segment(
            id=f"s{i:03d}",
            pair=pair,
            source_text=f"seg-s{i:03d} 这是第 {i} 句测试文本。",
            reference_text=f"This is test sentence number {i}.",
        )
        for i in range(1, n + 1)
    ]


def make_exemplars(pair: LanguagePair = ZH_EN) -> ExemplarSet:
    return ExemplarSet(
        pair=pair,
        items=tuple(Exemplar(source=f"例句{i}。", target=f"Example sentence {i}.") for i in range(1, 6)),
    )


def segment_token(prompt: str) -> str:
    match = _SEGMENT_TOKEN.search(prompt)
    if not match:
        raise AssertionError(f"no seg-<id> token in prompt: {prompt[:80]!r}")
    return match.group(1)


def estimated_draft(prompt: str) -> str:
    match = _ESTIMATE_TAIL.search(prompt)
    assert match, "not an estimate prompt"
    return match.group(1)


def refine_draft(prompt: str) -> str:
    match = _REFINE_TARGET.search(prompt)
    assert match, "not a refine prompt"
    return match.group(1)


class PipelineScript:
    """Mock provider handler dispatching on the request tag.

    `estimate` and `refine` receive (segment id, round number) so tests can
    script per-iteration behavior; rounds count per segment per tag.
    """

    def __init__(self, translate=None, estimate=None, refine=None, baseline=None):
        self.translate = translate or (lambda sid: f"Initial translation of {sid}.")
        self.estimate = estimate or (lambda sid, rnd: NO_ERROR_FEEDBACK)
        self.refine = refine or (lambda sid, rnd, draft: f"Refined translation of {sid}.")
        self.baseline = baseline or (lambda sid, draft: f"Rewritten translation of {sid}.")
        self._rounds: dict[tuple[str, str], int] = {}

    def __call__(self, request: CompletionRequest) -> str:
        sid = segment_token(request.prompt)
        if request.tag == "translate":
            return self.translate(sid)
        if request.tag == "estimate":
            rnd = self._rounds.get(("estimate", sid), 0) + 1
            self._rounds[("estimate", sid)] = rnd
            return self.estimate(sid, rnd)
        if request.tag == "refine":
            rnd = self._rounds.get(("refine", sid), 0) + 1
            self._rounds[("refine", sid)] = rnd
            return self.refine(sid, rnd, refine_draft(request.prompt))
        if request.tag == "baseline":
            return self.baseline(sid, request.prompt)
        raise AssertionError(f"unexpected tag {request.tag!r}")


def mock_gateway(script: PipelineScript | None = None) -> Gateway:
    provider = MockProvider(handler=script or PipelineScript())
    return Gateway(mode="mock", providers={"mock": provider})


@pytest.fixture
def segments():
    return make_segments(5)


@pytest.fixture
def exemplars():
    return make_exemplars()
