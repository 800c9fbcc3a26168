"""Report tables derived purely from run archives.

Each report renders from one data structure into both aligned plain text and
TSV. Neural metric scores are stored on their native scale in archives and
rescaled by x100 here, in the report layer; BLEU is already 0-100.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import MissingInputs, RunArchive
from .metrics import delta_by_error_type, kendall_tau_all, make_eval_table, pairwise_accuracy, win_tie_loss

REPORT_KINDS = ("ablation", "error_type", "cnm_cu", "meta_eval", "preference")

METRIC_DISPLAY = {
    "bleu": "BLEU",
    "comet22": "COMET",
    "cometkiwi": "COMETKiwi",
    "bleurt20": "BLEURT",
}
_NEURAL_METRICS = {"comet22", "cometkiwi", "bleurt20"}

# Column order of the error-type analysis; matches the published layout.
_ERROR_TYPE_COLUMNS = [
    ("accuracy", "mistranslation"),
    ("accuracy", "omission"),
    ("accuracy", "untranslated_text"),
    ("accuracy", "addition"),
    ("style", "awkward"),
    ("fluency", "grammar"),
    ("terminology", "inappropriate_for_context"),
    ("locale_convention", "name_format"),
]


@dataclass(frozen=True)
class ReportTable:
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def to_text(self) -> str:
        widths = [len(col) for col in self.columns]
        for row in self.rows:
            for i, cell in enumerate(row):
                widths[i] = max(widths[i], len(cell))
        lines = [self.title]
        lines.append("  ".join(col.ljust(widths[i]) for i, col in enumerate(self.columns)).rstrip())
        lines.append("  ".join("-" * w for w in widths))
        for row in self.rows:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        lines.extend("\t".join(row) for row in self.rows)
        return "\n".join(lines) + "\n"


def _scale(metric: str, value: float) -> float:
    return value * 100.0 if metric in _NEURAL_METRICS else value


def render_report(archive: RunArchive, kind: str) -> ReportTable:
    if kind == "ablation":
        return _ablation_report(archive)
    if kind == "error_type":
        return _error_type_report(archive)
    if kind == "cnm_cu":
        return _cnm_cu_report(archive)
    if kind == "meta_eval":
        return _meta_eval_report(archive)
    if kind == "preference":
        return _preference_report(archive)
    raise ValueError(f"unknown report kind {kind!r}; expected one of {REPORT_KINDS}")


def _variant_label(archive: RunArchive) -> str:
    label = archive.manifest.get("label")
    if label:
        return label
    config = archive.manifest.get("config", {})
    return config.get("refine_variant", "run")


def _ablation_report(archive: RunArchive) -> ReportTable:
    corpus_scores = archive.scores.get("corpus")
    if not corpus_scores:
        raise MissingInputs("ablation report needs corpus-level scores (run the score step first)")
    metrics = [m for m in ("bleu", "comet22", "cometkiwi", "bleurt20") if m in corpus_scores]
    if not metrics:
        raise MissingInputs("ablation report needs at least one of bleu/comet22/cometkiwi/bleurt20")
    for metric in metrics:
        if "initial" not in corpus_scores[metric] or "final" not in corpus_scores[metric]:
            raise MissingInputs(f"ablation report needs initial and final scores for {metric}")

    it_row = ["IT"]
    variant_row = [_variant_label(archive)]
    for metric in metrics:
        initial = _scale(metric, corpus_scores[metric]["initial"])
        final = _scale(metric, corpus_scores[metric]["final"])
        it_row.append(f"{initial:.2f}")
        variant_row.append(f"{final:.2f} ({final - initial:+.2f})")
    columns = ("Variant",) + tuple(METRIC_DISPLAY[m] for m in metrics)
    return ReportTable(
        title="Quality by pipeline variant (deltas vs IT)",
        columns=columns,
        rows=(tuple(it_row), tuple(variant_row)),
    )


def _error_type_report(archive: RunArchive, metric: str = "comet22") -> ReportTable:
    segment_scores = archive.scores.get("segment", {}).get(metric)
    if not segment_scores:
        raise MissingInputs(f"error-type report needs per-segment {metric} scores")
    before = segment_scores.get("initial")
    after = segment_scores.get("final")
    if before is None or after is None:
        raise MissingInputs(f"error-type report needs initial and final per-segment {metric} scores")
    estimations = {
        record.segment_id: record.estimations[0] for record in archive.records if record.estimations
    }
    deltas = delta_by_error_type(
        {k: _scale(metric, v) for k, v in before.items()},
        {k: _scale(metric, v) for k, v in after.items()},
        estimations,
    )
    buckets = list(_ERROR_TYPE_COLUMNS)
    for bucket in sorted(deltas, key=str):
        if bucket not in buckets:
            buckets.append(bucket)
    columns = ["Variant"] + [f"{top}/{sub}" if sub else top for top, sub in buckets]
    row = [_variant_label(archive)]
    for bucket in buckets:
        row.append(f"{deltas[bucket]:+.2f}" if bucket in deltas else "/")
    return ReportTable(
        title=f"Mean {METRIC_DISPLAY.get(metric, metric)} delta by estimated error type",
        columns=tuple(columns),
        rows=(tuple(row),),
    )


def _cnm_cu_report(archive: RunArchive) -> ReportTable:
    summary = archive.summary
    if not summary or "CN" not in summary:
        raise MissingInputs("cnm_cu report needs the run summary (CN/CM/CU)")
    rate = summary.get("execution_rate", 0.0)
    row = (
        _variant_label(archive),
        str(summary["CN"]),
        str(summary["CM"]),
        str(summary["CU"]),
        f"{rate:.3f}",
    )
    return ReportTable(
        title="Refinement gate statistics",
        columns=("Run", "CN", "CM", "CU", "Execution rate"),
        rows=(row,),
    )


def _meta_eval_report(archive: RunArchive) -> ReportTable:
    blob = archive.extras.get("meta_eval")
    if not blob:
        raise MissingInputs("meta_eval report needs extras['meta_eval'] (metric and human score tables)")
    human = blob.get("human_scores")
    metric_tables = blob.get("metric_scores")
    if not human or not metric_tables:
        raise MissingInputs("meta_eval report needs both human_scores and metric_scores")
    rows = []
    for metric_name in sorted(metric_tables):
        table = make_eval_table(metric_tables[metric_name], human)
        accuracy = pairwise_accuracy(table) * 100.0
        metric_flat: list[float] = []
        human_flat: list[float] = []
        for system in table.systems:
            for segment in table.segments:
                metric_flat.append(table.metric[system][segment])
                human_flat.append(table.human[system][segment])
        kendall = kendall_tau_all(metric_flat, human_flat)
        rows.append(
            (
                METRIC_DISPLAY.get(metric_name, metric_name),
                f"{accuracy:.2f}",
                f"{kendall['average'] * 100.0:.2f}",
            )
        )
    return ReportTable(
        title="Metric meta-evaluation against human MQM",
        columns=("Metric", "System-level accuracy (%)", "Segment-level Kendall (%)"),
        rows=tuple(rows),
    )


def _preference_report(archive: RunArchive) -> ReportTable:
    blob = archive.extras.get("preference")
    if not blob:
        raise MissingInputs("preference report needs extras['preference'] (judgments and side map)")
    side_map = {pair_id: tuple(sides) for pair_id, sides in blob["side_map"].items()}

    class _J:
        __slots__ = ("pair_id", "choice")

        def __init__(self, payload):
            self.pair_id = payload["pair_id"]
            self.choice = payload["choice"]

    tally = win_tie_loss([_J(j) for j in blob["judgments"]], side_map)
    systems = sorted(tally.wins)
    columns = tuple(f"{system} Win" for system in systems[:1]) + ("Tie",) + tuple(
        f"{system} Win" for system in systems[1:]
    )
    row = (str(tally.wins[systems[0]]), str(tally.ties)) + tuple(str(tally.wins[s]) for s in systems[1:])
    return ReportTable(
        title="Pairwise human preference",
        columns=columns,
        rows=(row,),
    )
