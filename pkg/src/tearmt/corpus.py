"""Dataset ingestion, deterministic sampling, and run persistence.

A run archive is a directory of canonical-JSON files plus a digest manifest,
so archives are diff-able, verifiable, and byte-reproducible: every report can
be regenerated from the archive alone, with no cache or network access.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    LanguagePair,
    Segment,
    TearError,
    TranslationDraft,
    validate_language_pair,
    validate_segment,
)
from .mqm import ErrorAnnotation, ErrorCategory, EstimationResult, MqmRow
from .orchestrator import ExperimentSummary, TearRecord

ARCHIVE_VERSION = 1
TOOL_VERSION = "tearmt 0.1.0"

FORMAT_TSV = "tsv"
FORMAT_PARALLEL = "parallel_text"


class FormatError(TearError):
    pass


class EncodingError(TearError):
    pass


class SampleTooLarge(TearError):
    pass


class VersionError(TearError):
    pass


class CorruptArchive(TearError):
    pass


class MissingInputs(TearError):
    pass


@dataclass(frozen=True)
class TestSet:
    name: str
    pair: LanguagePair
    segments: tuple[Segment, ...]
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.segments)


def _read_utf8(path: Path) -> str:
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc


def load_testset(
    path: str | Path,
    fmt: str = FORMAT_TSV,
    pair: LanguagePair | None = None,
    name: str | None = None,
    reference_path: str | Path | None = None,
    provenance: str = "",
    allowed_codes: set[str] | None = None,
) -> TestSet:
    """Load a test set from a TSV file or a pair of aligned text files.

    TSV columns: id, source, and optionally reference and doc_id. For
    `parallel_text`, `path` holds sources, `reference_path` references, and
    ids are assigned from 1-based line numbers.
    """
    if pair is None:
        raise FormatError("a language pair is required to load a test set")
    validate_language_pair(pair, allowed_codes)
    path = Path(path)
    segments: list[Segment] = []

    if fmt == FORMAT_TSV:
        lines = _read_utf8(path).splitlines()
        if not lines:
            raise FormatError(f"{path}: empty file")
        header = lines[0].split("\t")
        try:
            id_col = header.index("id")
            source_col = header.index("source")
        except ValueError as exc:
            raise FormatError(f"{path}: header must include id and source columns: {exc}")
        ref_col = header.index("reference") if "reference" in header else None
        doc_col = header.index("doc_id") if "doc_id" in header else None
        for line_no, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) < len(header):
                raise FormatError(f"{path}:{line_no}: expected {len(header)} columns, got {len(cells)}")
            segments.append(
                Segment(
                    id=cells[id_col],
                    pair=pair,
                    source_text=cells[source_col],
                    reference_text=cells[ref_col] if ref_col is not None and cells[ref_col] else None,
                    doc_id=cells[doc_col] if doc_col is not None and cells[doc_col] else None,
                )
            )
    elif fmt == FORMAT_PARALLEL:
        sources = _read_utf8(path).splitlines()
        references = _read_utf8(Path(reference_path)).splitlines() if reference_path else None
        if references is not None and len(references) != len(sources):
            raise FormatError(
                f"{path}: {len(sources)} source lines vs {len(references)} reference lines"
            )
        for i, source in enumerate(sources, start=1):
            segments.append(
                Segment(
                    id=str(i),
                    pair=pair,
                    source_text=source,
                    reference_text=references[i - 1] if references else None,
                )
            )
    else:
        raise FormatError(f"unknown test set format {fmt!r}")

    seen: set[str] = set()
    for segment in segments:
        validate_segment(segment)
        if segment.id in seen:
            raise FormatError(f"{path}: duplicate segment id {segment.id!r}")
        seen.add(segment.id)
    return TestSet(
        name=name or path.stem,
        pair=pair,
        segments=tuple(segments),
        provenance=provenance,
    )


def sample_testset(testset: TestSet, n: int, seed: int) -> TestSet:
    """Uniform sample without replacement, order-preserving and seeded."""
    if n > len(testset.segments):
        raise SampleTooLarge(f"cannot sample {n} from {len(testset.segments)} segments")
    if n == len(testset.segments):
        chosen = testset.segments
    else:
        rng = random.Random(seed)
        indices = sorted(rng.sample(range(len(testset.segments)), n))
        chosen = tuple(testset.segments[i] for i in indices)
    return TestSet(
        name=f"{testset.name}-sample{n}",
        pair=testset.pair,
        segments=chosen,
        provenance=f"{testset.provenance} (sampled n={n}, seed={seed})".strip(),
    )


def load_mqm_dump(path: str | Path) -> list[MqmRow]:
    """Read the simplified human-annotation schema.

    Columns: system, segment_id, severity, category, span (optional). The
    severity column also accepts the `no-error` and `missing` pseudo-tokens.
    """
    path = Path(path)
    lines = _read_utf8(path).splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split("\t")
    required = ("system", "segment_id", "severity")
    try:
        cols = {name: header.index(name) for name in required}
    except ValueError:
        raise FormatError(f"{path}: header must include columns {required}")
    category_col = header.index("category") if "category" in header else None
    span_col = header.index("span") if "span" in header else None

    rows: list[MqmRow] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) <= max(cols.values()):
            raise FormatError(f"{path}:{line_no}: too few columns")
        rows.append(
            MqmRow(
                system=cells[cols["system"]],
                segment_id=cells[cols["segment_id"]],
                severity=cells[cols["severity"]],
                category=cells[category_col] if category_col is not None and len(cells) > category_col else "",
                span=cells[span_col] if span_col is not None and len(cells) > span_col and cells[span_col] else None,
                line_no=line_no,
            )
        )
    return rows


# -- domain type serialization ------------------------------------------------


def draft_to_dict(draft: TranslationDraft) -> dict:
    return {
        "segment_id": draft.segment_id,
        "text": draft.text,
        "stage": draft.stage,
        "producer_model": draft.producer_model,
        "prompt_kind": draft.prompt_kind,
        "iteration": draft.iteration,
    }


def draft_from_dict(payload: dict) -> TranslationDraft:
    return TranslationDraft(**payload)


def estimation_to_dict(estimation: EstimationResult) -> dict:
    return {
        "annotations": [
            {
                "severity": ann.severity,
                "top": ann.category.top,
                "sub": ann.category.sub,
                "raw": ann.category.raw,
                "span": ann.span,
            }
            for ann in estimation.annotations
        ],
        "needs_refinement": estimation.needs_refinement,
        "raw_text": estimation.raw_text,
        "parse_warnings": list(estimation.parse_warnings),
    }


def estimation_from_dict(payload: dict) -> EstimationResult:
    annotations = tuple(
        ErrorAnnotation(
            severity=ann["severity"],
            category=ErrorCategory(top=ann["top"], sub=ann["sub"], raw=ann.get("raw")),
            span=ann.get("span"),
        )
        for ann in payload["annotations"]
    )
    return EstimationResult(
        annotations=annotations,
        needs_refinement=payload["needs_refinement"],
        raw_text=payload["raw_text"],
        parse_warnings=tuple(payload.get("parse_warnings", [])),
    )


def record_to_dict(record: TearRecord) -> dict:
    return {
        "segment_id": record.segment_id,
        "initial": draft_to_dict(record.initial),
        "estimations": [estimation_to_dict(e) for e in record.estimations],
        "refined": [draft_to_dict(d) for d in record.refined],
        "outcome": record.outcome,
        "final_text": record.final_text,
        "notes": list(record.notes),
    }


def record_from_dict(payload: dict) -> TearRecord:
    return TearRecord(
        segment_id=payload["segment_id"],
        initial=draft_from_dict(payload["initial"]),
        estimations=tuple(estimation_from_dict(e) for e in payload["estimations"]),
        refined=tuple(draft_from_dict(d) for d in payload["refined"]),
        outcome=payload["outcome"],
        final_text=payload["final_text"],
        notes=tuple(payload.get("notes", [])),
    )


# -- run archive ---------------------------------------------------------------


@dataclass
class RunArchive:
    """Self-contained result of one run: manifest, traces, scores, summaries."""

    manifest: dict
    records: list[TearRecord]
    scores: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def make_manifest(config_dict: dict, paths: dict, label: str = "") -> dict:
    """Run manifest; deliberately carries no wall-clock data so archives
    produced from the same inputs are byte-identical."""
    return {
        "format_version": ARCHIVE_VERSION,
        "tool_version": TOOL_VERSION,
        "label": label,
        "config": config_dict,
        "paths": paths,
    }


_ARCHIVE_FILES = ("manifest.json", "records.jsonl", "scores.json", "summary.json", "extras.json")


def _dump_json(payload) -> str:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n"


def save_run(archive: RunArchive, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    contents = {
        "manifest.json": _dump_json(archive.manifest),
        "records.jsonl": "".join(
            json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=True) + "\n" for r in archive.records
        ),
        "scores.json": _dump_json(archive.scores),
        "summary.json": _dump_json(archive.summary),
        "extras.json": _dump_json(archive.extras),
    }
    digest_lines = []
    for filename in _ARCHIVE_FILES:
        data = contents[filename].encode("utf-8")
        (path / filename).write_bytes(data)
        digest_lines.append(f"{hashlib.sha256(data).hexdigest()}  {filename}")
    (path / "SHA256SUMS").write_text("\n".join(digest_lines) + "\n", encoding="utf-8")
    return path


def load_run(path: str | Path) -> RunArchive:
    path = Path(path)
    sums_file = path / "SHA256SUMS"
    if not sums_file.exists():
        raise CorruptArchive(f"{path}: missing SHA256SUMS")
    expected: dict[str, str] = {}
    for line in sums_file.read_text("utf-8").splitlines():
        if line.strip():
            digest, _, filename = line.partition("  ")
            expected[filename] = digest
    for filename in _ARCHIVE_FILES:
        file_path = path / filename
        if not file_path.exists():
            raise CorruptArchive(f"{path}: missing {filename}")
        actual = hashlib.sha256(file_path.read_bytes()).hexdigest()
        if expected.get(filename) != actual:
            raise CorruptArchive(f"{path}: digest mismatch for {filename}")

    try:
        manifest = json.loads((path / "manifest.json").read_text("utf-8"))
        records = [
            record_from_dict(json.loads(line))
            for line in (path / "records.jsonl").read_text("utf-8").splitlines()
            if line.strip()
        ]
        scores = json.loads((path / "scores.json").read_text("utf-8"))
        summary = json.loads((path / "summary.json").read_text("utf-8"))
        extras = json.loads((path / "extras.json").read_text("utf-8"))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptArchive(f"{path}: cannot parse archive contents: {exc}") from exc

    version = manifest.get("format_version")
    if version is None or version > ARCHIVE_VERSION:
        raise VersionError(f"{path}: archive format version {version!r} is newer than supported {ARCHIVE_VERSION}")
    return RunArchive(manifest=manifest, records=records, scores=scores, summary=summary, extras=extras)


def summary_to_dict(summary: ExperimentSummary) -> dict:
    return summary.as_dict()
