"""MQM error annotations: parsing model output, feedback serialization, scoring.

The parser is deliberately forgiving: estimator output arrives as
semi-structured text, sometimes wrapped in prose, with inconsistent quoting
and separators. Anything that cannot be read conservatively yields zero
annotations and a warning rather than an exception, so the refinement gate
never fires on garbage.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

from .core import TearError

SEVERITIES = ("critical", "major", "minor")
_SEVERITY_RANK = {sev: i for i, sev in enumerate(SEVERITIES)}

MAX_ANNOTATIONS = 5

TOP_NO_ERROR = "no_error"
TOP_OTHER = "other"
TOP_NON_TRANSLATION = "non_translation"

DEFAULT_WEIGHTS: dict[str, float] = {"critical": 25.0, "major": 5.0, "minor": 1.0}
DEFAULT_CAP = 25.0


class WeightError(TearError):
    """A severity weight is missing or non-positive."""


class FormatError(TearError):
    """A human-annotation row cannot be interpreted."""


def _normalize_token(raw: str) -> str:
    return re.sub(r"[\s\-]+", "_", raw.strip().lower())


def _load_hierarchy() -> dict[str, frozenset[str]]:
    table: dict[str, set[str]] = {}
    text = resources.files("tearmt").joinpath("data/mqm_hierarchy.tsv").read_text("utf-8")
    for line in text.splitlines()[1:]:
        if not line.strip():
            continue
        top_raw, sub_raw, _desc = line.split("\t", 2)
        top = _normalize_token(top_raw)
        table.setdefault(top, set())
        if sub_raw.strip():
            table[top].add(_normalize_token(sub_raw))
    return {top: frozenset(subs) for top, subs in table.items()}


HIERARCHY: dict[str, frozenset[str]] = _load_hierarchy()

# Shorthand labels that occur in model output and in published tables.
_SUB_ALIASES = {
    ("terminology", "inappropriate"): "inappropriate_for_context",
    ("terminology", "inconsistent"): "inconsistent_use",
}


@dataclass(frozen=True)
class ErrorCategory:
    """A (top, sub) pair from the MQM hierarchy.

    When an unknown label is remapped to `other`, the original text is kept
    in `raw` so nothing is silently lost.
    """

    top: str
    sub: str | None = None
    raw: str | None = None

    @property
    def label(self) -> str:
        if self.sub:
            return f"{self.top}/{self.sub}"
        return self.top


@dataclass(frozen=True)
class ErrorAnnotation:
    severity: str
    category: ErrorCategory
    span: str | None = None


@dataclass(frozen=True)
class EstimationResult:
    """Typed outcome of one estimation call, plus the refinement verdict."""

    annotations: tuple[ErrorAnnotation, ...]
    needs_refinement: bool
    raw_text: str
    parse_warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class MQMScore:
    value: float
    weights_used: dict[str, float]
    capped: bool = False


@dataclass(frozen=True)
class MqmRow:
    """One simplified human-annotation row: (system, segment) plus one error.

    `severity` may also be the pseudo-tokens `no-error` (explicit zero-error
    marker) or `missing` (annotation absent; segment to be excluded).
    """

    system: str
    segment_id: str
    severity: str
    category: str = ""
    span: str | None = None
    line_no: int = 0


def normalize_category(top_raw: str, sub_raw: str | None) -> tuple[ErrorCategory, str | None]:
    """Map a raw (top, sub) label onto the hierarchy.

    Returns the category plus an optional warning. Unknown pairs are remapped
    to `other` with the raw label preserved; there is no third outcome.
    """
    top = _normalize_token(top_raw)
    sub = _normalize_token(sub_raw) if sub_raw and sub_raw.strip() else None
    raw_label = f"{top_raw.strip()}/{sub_raw.strip()}" if sub_raw and sub_raw.strip() else top_raw.strip()

    if top == TOP_NO_ERROR:
        return ErrorCategory(TOP_NO_ERROR), None
    if top in HIERARCHY:
        subs = HIERARCHY[top]
        if sub is None:
            if not subs:
                return ErrorCategory(top), None
            return (
                ErrorCategory(TOP_OTHER, raw=raw_label),
                f"category {raw_label!r} is missing its subcategory; remapped to other",
            )
        if sub in subs:
            return ErrorCategory(top, sub), None
        if f"{sub}_format" in subs:
            return ErrorCategory(top, f"{sub}_format"), None
        alias = _SUB_ALIASES.get((top, sub))
        if alias and alias in subs:
            return ErrorCategory(top, alias), None
    return (
        ErrorCategory(TOP_OTHER, raw=raw_label),
        f"unknown category {raw_label!r}; remapped to other",
    )


_QUOTE_CHARS = "\"'“”‘’"

_SEVERITY_MARKER = re.compile(
    r"[\"'“”]?\b(critical|major|minor)\b[\"'“”]?\s*:", re.IGNORECASE
)
_NO_ERROR_ENTRY = re.compile(
    r"^[\"'“”]?no[\s\-_]?errors?[\"'“”]?[\s.,;:]*$", re.IGNORECASE
)
_ENTRY = re.compile(
    r"^(?P<top>[A-Za-z][A-Za-z _\-]*?)"
    r"(?:\s*/\s*(?P<sub>[A-Za-z][A-Za-z _\-]*?))?"
    r"(?:\s+-\s*(?P<span>.+))?$",
    re.DOTALL,
)


def _unquote_span(raw: str) -> str | None:
    span = raw.strip()
    # Stray unbalanced trailing quote (common in model output) is dropped
    # before matching an enclosing pair. Exactly one enclosing pair is
    # stripped so quotes that belong to the span text survive.
    if len(span) >= 2 and span[-1] in _QUOTE_CHARS and span[0] in _QUOTE_CHARS and span[0] != span[-1]:
        span = span[:-1].rstrip()
    if len(span) >= 2 and span[0] == span[-1] and span[0] in _QUOTE_CHARS:
        span = span[1:-1]
    span = span.strip()
    return span or None


def _looks_structured(entry: str) -> bool:
    return "/" in entry or re.search(r"\s-\s", entry) is not None


def parse_estimation(raw_text: str) -> EstimationResult:
    """Parse estimator output into typed annotations and the gate verdict.

    Never raises: text without recognizable severity markers produces zero
    annotations, `needs_refinement=False`, and a `parse_failed` warning.
    """
    warnings: list[str] = []
    annotations: list[ErrorAnnotation] = []
    saw_block = False

    markers = list(_SEVERITY_MARKER.finditer(raw_text))
    for i, match in enumerate(markers):
        saw_block = True
        severity = match.group(1).lower()
        end = markers[i + 1].start() if i + 1 < len(markers) else len(raw_text)
        block = raw_text[match.end() : end]
        for piece in re.split(r"[\n;]", block):
            entry = piece.strip().strip(",").strip()
            entry = entry.strip("{}").strip()
            if not entry or all(ch in _QUOTE_CHARS + " ." for ch in entry):
                continue
            if _NO_ERROR_ENTRY.match(entry):
                continue
            parsed = _ENTRY.match(entry)
            if not parsed:
                warnings.append(f"unrecognized entry under {severity}: {entry[:60]!r}")
                continue
            top_raw = parsed.group("top")
            sub_raw = parsed.group("sub")
            span_raw = parsed.group("span")
            category, warning = normalize_category(top_raw, sub_raw)
            if category.top == TOP_NO_ERROR:
                continue
            if category.top == TOP_OTHER and category.raw and not _looks_structured(entry):
                # A bare unknown word run is prose, not an annotation.
                warnings.append(f"ignored prose under {severity}: {entry[:60]!r}")
                continue
            if warning:
                warnings.append(warning)
            span = _unquote_span(span_raw) if span_raw else None
            annotations.append(ErrorAnnotation(severity, category, span))

    if not saw_block:
        return EstimationResult(
            annotations=(),
            needs_refinement=False,
            raw_text=raw_text,
            parse_warnings=("parse_failed: no severity markers found",),
        )

    annotations, extra = _apply_annotation_rules(annotations)
    warnings.extend(extra)
    needs_refinement = any(a.category.top != TOP_NO_ERROR for a in annotations)
    return EstimationResult(
        annotations=tuple(annotations),
        needs_refinement=needs_refinement,
        raw_text=raw_text,
        parse_warnings=tuple(warnings),
    )


def _apply_annotation_rules(annotations: list[ErrorAnnotation]) -> tuple[list[ErrorAnnotation], list[str]]:
    """Enforce the non-translation solitary rule, the five-error clamp, and
    the canonical critical/major/minor ordering (stable within a severity),
    which makes serialize/parse round trips exact."""
    warnings: list[str] = []
    non_translation = [a for a in annotations if a.category.top == TOP_NON_TRANSLATION]
    if non_translation and len(annotations) > 1:
        warnings.append("non-translation must be the sole annotation; dropped the rest")
        annotations = non_translation[:1]
    if len(annotations) > MAX_ANNOTATIONS:
        ranked = sorted(range(len(annotations)), key=lambda i: (_SEVERITY_RANK[annotations[i].severity], i))
        keep = sorted(ranked[:MAX_ANNOTATIONS])
        warnings.append(f"clamped {len(annotations)} annotations to the {MAX_ANNOTATIONS} most severe")
        annotations = [annotations[i] for i in keep]
    annotations = sorted(annotations, key=lambda a: _SEVERITY_RANK[a.severity])
    return annotations, warnings


def _category_text(category: ErrorCategory) -> str:
    top = category.top.replace("_", " ")
    if category.sub:
        return f"{top}/{category.sub.replace('_', ' ')}"
    return top


def serialize_feedback(result: EstimationResult) -> str:
    """Canonical critical/major/minor feedback layout for refine prompts.

    `parse_estimation(serialize_feedback(r))` reproduces r's annotations
    (severity, category, span) exactly.
    """
    lines = []
    for severity in SEVERITIES:
        entries = []
        for ann in result.annotations:
            if ann.severity != severity:
                continue
            text = _category_text(ann.category)
            if ann.span is not None:
                text += f' - "{ann.span}"'
            entries.append(text)
        lines.append(f"{severity}: {'; '.join(entries) if entries else 'no-error'}")
    return "\n".join(lines)


def mqm_score(
    annotations: list[ErrorAnnotation] | tuple[ErrorAnnotation, ...],
    weights: dict[str, float] | None = None,
    cap: float | None = None,
) -> MQMScore:
    """Severity-weighted negative score; 0 means error-free."""
    weights = dict(weights) if weights is not None else dict(DEFAULT_WEIGHTS)
    for severity, weight in weights.items():
        if weight <= 0:
            raise WeightError(f"weight for {severity} must be positive, got {weight}")
    total = 0.0
    for ann in annotations:
        if ann.category.top == TOP_NO_ERROR:
            continue
        try:
            total += weights[ann.severity]
        except KeyError:
            raise WeightError(f"no weight configured for severity {ann.severity!r}")
    value = -total if total else 0.0
    capped = False
    if cap is not None and value < -cap:
        value = -cap
        capped = True
    return MQMScore(value=value, weights_used=weights, capped=capped)


@dataclass
class HumanMqmTable:
    """Per-(system, segment) scores aggregated from human annotation rows."""

    scores: dict[tuple[str, str], MQMScore] = field(default_factory=dict)
    excluded: int = 0
    warnings: list[str] = field(default_factory=list)


def load_human_mqm(
    rows: list[MqmRow],
    weights: dict[str, float] | None = None,
    cap: float | None = None,
) -> HumanMqmTable:
    """Aggregate annotation rows into one MQM score per (system, segment).

    Segments marked `missing` are excluded and counted; `no-error` rows pin
    the segment at score 0.
    """
    grouped: dict[tuple[str, str], list[ErrorAnnotation]] = {}
    excluded_keys: set[tuple[str, str]] = set()
    table = HumanMqmTable()

    for row in rows:
        key = (row.system, row.segment_id)
        severity = row.severity.strip().lower().replace("_", "-")
        if severity == "missing":
            excluded_keys.add(key)
            continue
        if severity in ("no-error", "noerror", "no error"):
            grouped.setdefault(key, [])
            continue
        if severity not in SEVERITIES:
            raise FormatError(f"row {row.line_no}: unknown severity token {row.severity!r}")
        top_raw, _, sub_raw = row.category.partition("/")
        category, warning = normalize_category(top_raw, sub_raw or None)
        if warning:
            table.warnings.append(f"row {row.line_no}: {warning}")
        grouped.setdefault(key, []).append(ErrorAnnotation(severity, category, row.span))

    table.excluded = len(excluded_keys)
    for key, annotations in grouped.items():
        if key in excluded_keys:
            continue
        table.scores[key] = mqm_score(annotations, weights=weights, cap=cap)
    return table
