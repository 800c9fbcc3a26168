"""Translation scoring and metric meta-evaluation statistics.

BLEU is computed natively (WMT-style 13a tokenization, 4-gram corpus BLEU
with brevity penalty, smoothing off by default). Neural metrics are never
reimplemented; they arrive through the scorer bridge client in
:mod:`tearmt.bridge`.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from itertools import combinations

from .core import TearError
from .mqm import EstimationResult, TOP_NO_ERROR

NGRAM_ORDER = 4


class LengthMismatch(TearError):
    pass


class EmptyCorpus(TearError):
    pass


class TooFewSystems(TearError):
    pass


class DegenerateInput(TearError):
    """Kendall's tau is undefined (a constant list under tau-b/tau-c)."""


class EntityMismatch(TearError):
    pass


class AlignmentError(TearError):
    pass


class UnknownPair(TearError):
    pass


# -- BLEU --------------------------------------------------------------------

_13A_PUNCT = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
_13A_PERIOD_BEFORE = re.compile(r"([^0-9])([\.,])")
_13A_PERIOD_AFTER = re.compile(r"([\.,])([^0-9])")
_13A_DASH = re.compile(r"([0-9])(-)")
_WSP = re.compile(r"\s+")


def tokenize_13a(line: str) -> str:
    """WMT-standard tokenization: punctuation split except inside numbers."""
    norm = line.replace("<skipped>", "")
    norm = norm.replace("-\n", "").replace("\n", " ")
    norm = norm.replace("&quot;", '"').replace("&amp;", "&")
    norm = norm.replace("&lt;", "<").replace("&gt;", ">")
    norm = f" {norm} "
    norm = _13A_PUNCT.sub(r" \1 ", norm)
    norm = _13A_PERIOD_BEFORE.sub(r"\1 \2 ", norm)
    norm = _13A_PERIOD_AFTER.sub(r" \1 \2", norm)
    norm = _13A_DASH.sub(r"\1 \2 ", norm)
    norm = _WSP.sub(" ", norm)
    return norm.strip()


_TOKENIZERS = {
    "13a": tokenize_13a,
    "none": lambda line: line.strip(),
}

_LOG_ZERO = -9999999999.0


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidates: list[str],
    references: list[str],
    smooth_method: str = "none",
    smooth_value: float | None = None,
    tokenize: str = "13a",
    lowercase: bool = False,
) -> float:
    """Corpus-level BLEU in [0, 100].

    With `smooth_method="none"` a zero n-gram precision zeroes the score,
    matching the reference scorer; `"exp"`, `"floor"`, and `"add-k"` follow
    the reference smoothing schemes.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise EmptyCorpus("need at least one candidate/reference pair")
    if smooth_method not in ("none", "exp", "floor", "add-k"):
        raise ValueError(f"unknown smooth_method {smooth_method!r}")

    tokenizer = _TOKENIZERS[tokenize]
    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    sys_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        if lowercase:
            cand, ref = cand.lower(), ref.lower()
        cand_tokens = tokenizer(cand).split()
        ref_tokens = tokenizer(ref).split()
        sys_len += len(cand_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, NGRAM_ORDER + 1):
            cand_grams = _ngrams(cand_tokens, n)
            if not cand_grams:
                continue
            ref_grams = _ngrams(ref_tokens, n)
            total[n - 1] += sum(cand_grams.values())
            correct[n - 1] += sum(min(count, ref_grams[gram]) for gram, count in cand_grams.items())

    precisions = [0.0] * NGRAM_ORDER
    smooth_mteval = 1.0
    floor = smooth_value if smooth_value is not None else 0.0
    add_k = smooth_value if smooth_value is not None else 1.0
    for n in range(NGRAM_ORDER):
        if smooth_method == "add-k" and n > 0:
            correct[n] += add_k
            total[n] += add_k
        if total[n] == 0:
            break
        if correct[n] == 0:
            if smooth_method == "exp":
                smooth_mteval *= 2
                precisions[n] = 100.0 / (smooth_mteval * total[n])
            elif smooth_method == "floor":
                precisions[n] = 100.0 * floor / total[n]
        else:
            precisions[n] = 100.0 * correct[n] / total[n]

    if sys_len == 0:
        return 0.0
    brevity_penalty = math.exp(1 - ref_len / sys_len) if sys_len < ref_len else 1.0
    log_sum = sum(math.log(p) if p > 0 else _LOG_ZERO for p in precisions)
    score = brevity_penalty * math.exp(log_sum / NGRAM_ORDER)
    return 0.0 if score < 1e-300 else score


# -- meta-evaluation ---------------------------------------------------------


@dataclass(frozen=True)
class SystemEvalTable:
    """Aligned per-(system, segment) metric and human scores.

    Built through :func:`make_eval_table`, which enforces complete-case
    alignment: a segment missing for any system is dropped for all systems.
    """

    systems: tuple[str, ...]
    segments: tuple[str, ...]
    metric: dict[str, dict[str, float]]
    human: dict[str, dict[str, float]]


def make_eval_table(
    metric: dict[str, dict[str, float]],
    human: dict[str, dict[str, float]],
) -> SystemEvalTable:
    systems = tuple(sorted(metric))
    if tuple(sorted(human)) != systems:
        raise AlignmentError("metric and human tables cover different systems")
    shared: set[str] | None = None
    for system in systems:
        ids = set(metric[system]) & set(human[system])
        shared = ids if shared is None else shared & ids
    segments = tuple(sorted(shared or ()))
    if not segments:
        raise AlignmentError("no segment is covered by every system")
    return SystemEvalTable(
        systems=systems,
        segments=segments,
        metric={s: {seg: metric[s][seg] for seg in segments} for s in systems},
        human={s: {seg: human[s][seg] for seg in segments} for s in systems},
    )


def _system_means(table: SystemEvalTable) -> tuple[dict[str, float], dict[str, float]]:
    n = len(table.segments)
    metric_mean = {s: sum(table.metric[s].values()) / n for s in table.systems}
    human_mean = {s: sum(table.human[s].values()) / n for s in table.systems}
    return metric_mean, human_mean


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def pairwise_accuracy(table: SystemEvalTable) -> float:
    """Fraction of system pairs where the metric orders them like the human.

    Tie semantics are strict: a zero difference on one side agrees only with
    a zero difference on the other.
    """
    if len(table.systems) < 2:
        raise TooFewSystems("pairwise accuracy needs at least two systems")
    metric_mean, human_mean = _system_means(table)
    agree = 0
    pairs = 0
    for a, b in combinations(table.systems, 2):
        pairs += 1
        if _sign(metric_mean[a] - metric_mean[b]) == _sign(human_mean[a] - human_mean[b]):
            agree += 1
    return agree / pairs


def kendall_tau(a: list[float], b: list[float], variant: str = "tau_b") -> float:
    """Pairwise rank concordance; variants a, b, and c.

    All three are computed by direct pair counting, so values are exact for
    any input size used here.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} values")
    n = len(a)
    if n < 2:
        raise DegenerateInput("kendall tau needs at least two observations")
    if variant not in ("tau_a", "tau_b", "tau_c"):
        raise ValueError(f"unknown kendall variant {variant!r}")

    concordant = discordant = ties_a = ties_b = 0
    for i, j in combinations(range(n), 2):
        da = a[i] - a[j]
        db = b[i] - b[j]
        if da == 0 and db == 0:
            ties_a += 1
            ties_b += 1
        elif da == 0:
            ties_a += 1
        elif db == 0:
            ties_b += 1
        elif (da > 0) == (db > 0):
            concordant += 1
        else:
            discordant += 1

    n0 = n * (n - 1) // 2
    diff = concordant - discordant
    if variant == "tau_a":
        return diff / n0
    if variant == "tau_b":
        denom = math.sqrt((n0 - ties_a) * (n0 - ties_b))
        if denom == 0:
            raise DegenerateInput("tau-b is undefined when one list is constant")
        return diff / denom
    m = min(len(set(a)), len(set(b)))
    if m < 2:
        raise DegenerateInput("tau-c is undefined when one list is constant")
    return 2 * diff / (n * n * (m - 1) / m)


def kendall_tau_all(a: list[float], b: list[float]) -> dict[str, float]:
    """All three variants plus their average, for segment-level reporting."""
    values = {variant: kendall_tau(a, b, variant) for variant in ("tau_a", "tau_b", "tau_c")}
    values["average"] = sum(values.values()) / 3
    return values


@dataclass(frozen=True)
class RankingVector:
    """Ranks (1 = best) over a fixed entity list."""

    entities: tuple[str, ...]
    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.ranks) != list(range(1, len(self.entities) + 1)):
            raise ValueError(f"ranks must be a permutation of 1..{len(self.entities)}, got {self.ranks}")


def ranking_correlation(r1: RankingVector, r2: RankingVector) -> float:
    if set(r1.entities) != set(r2.entities):
        raise EntityMismatch(f"entity sets differ: {r1.entities} vs {r2.entities}")
    if len(r1.entities) < 2:
        raise DegenerateInput("need at least two entities")
    order = {entity: rank for entity, rank in zip(r2.entities, r2.ranks)}
    aligned = [order[entity] for entity in r1.entities]
    return kendall_tau(list(map(float, r1.ranks)), list(map(float, aligned)), "tau_b")


def delta_by_error_type(
    before: dict[str, float],
    after: dict[str, float],
    estimations: dict[str, EstimationResult],
) -> dict[tuple[str, str | None], float]:
    """Mean score delta per estimated error type.

    A segment with k distinct error types contributes its delta to all k
    buckets; empty buckets simply do not appear.
    """
    if set(before) != set(after) or not set(estimations) <= set(before):
        raise AlignmentError("before/after/estimation segment ids are not aligned")
    sums: dict[tuple[str, str | None], float] = {}
    counts: dict[tuple[str, str | None], int] = {}
    for seg_id, estimation in estimations.items():
        kinds = {
            (ann.category.top, ann.category.sub)
            for ann in estimation.annotations
            if ann.category.top != TOP_NO_ERROR
        }
        delta = after[seg_id] - before[seg_id]
        for kind in kinds:
            sums[kind] = sums.get(kind, 0.0) + delta
            counts[kind] = counts.get(kind, 0) + 1
    return {kind: sums[kind] / counts[kind] for kind in sums}


def error_count_histogram(
    estimations: list[EstimationResult],
) -> dict[tuple[str, str, str | None], int]:
    """Exact multiset counts keyed by (severity, top, sub)."""
    counts: dict[tuple[str, str, str | None], int] = {}
    for estimation in estimations:
        for ann in estimation.annotations:
            if ann.category.top == TOP_NO_ERROR:
                continue
            key = (ann.severity, ann.category.top, ann.category.sub)
            counts[key] = counts.get(key, 0) + 1
    return counts


@dataclass(frozen=True)
class WinTieLoss:
    wins: dict[str, int]
    ties: int
    total: int

    def percentage(self, system: str) -> float:
        return 100.0 * self.wins[system] / self.total if self.total else 0.0

    @property
    def tie_percentage(self) -> float:
        return 100.0 * self.ties / self.total if self.total else 0.0


def win_tie_loss(judgments, side_map: dict[str, tuple[str, str]]) -> WinTieLoss:
    """De-randomize blinded A/B judgments and tally per underlying system.

    `side_map` gives, per pair id, the system shown as A and the system shown
    as B. Judgments are objects with `pair_id` and `choice` ("A"/"B"/"tie").
    """
    systems: set[str] = set()
    for shown_a, shown_b in side_map.values():
        systems.add(shown_a)
        systems.add(shown_b)
    wins = {system: 0 for system in sorted(systems)}
    ties = 0
    total = 0
    for judgment in judgments:
        pair_id = judgment.pair_id
        if pair_id not in side_map:
            raise UnknownPair(f"judgment references unknown pair id {pair_id!r}")
        shown_a, shown_b = side_map[pair_id]
        choice = judgment.choice
        total += 1
        if choice == "tie":
            ties += 1
        elif choice == "A":
            wins[shown_a] += 1
        elif choice == "B":
            wins[shown_b] += 1
        else:
            raise ValueError(f"judgment choice must be A, B, or tie, got {choice!r}")
    return WinTieLoss(wins=wins, ties=ties, total=total)
