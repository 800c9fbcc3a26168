"""Deterministic prompt construction for every template variant.

Templates live as UTF-8 text files with `{placeholder}` markers, one file per
kind; an alternative directory can be supplied for customized wording.
Rendering is pure: identical inputs give byte-identical prompts.
"""

from __future__ import annotations

import enum
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import Exemplar, ExemplarSet, LanguagePair, Segment, TearError

TRANSLATE_SHOTS = 5
ESTIMATE_SHOTS = 3


class PlaceholderError(TearError):
    """A template placeholder cannot be filled (or a value is empty)."""


class MissingExemplars(TearError):
    """A few-shot template was requested without its exemplar set."""


class InsufficientPool(TearError):
    """The exemplar pool is smaller than the requested selection."""


class PromptKind(str, enum.Enum):
    TRANSLATE_ZERO = "translate_zero"
    TRANSLATE_FEW = "translate_few"
    ESTIMATE_ZERO = "estimate_zero"
    ESTIMATE_FEW = "estimate_few"
    REFINE_ALPHA = "refine_alpha"
    REFINE_BETA = "refine_beta"
    SCOT_BASELINE = "scot_baseline"
    CONTRASTIVE_BASELINE = "contrastive_baseline"


@dataclass(frozen=True)
class RenderedPrompt:
    kind: PromptKind
    text: str
    placeholders_filled: dict[str, str]


_PLACEHOLDER = re.compile(r"\{([a-z][a-z_0-9]*)\}")


class TemplateLibrary:
    """Loads and caches the template text for every prompt kind."""

    def __init__(self, directory: Path | None = None):
        self._directory = directory
        self._cache: dict[PromptKind, str] = {}

    def text(self, kind: PromptKind) -> str:
        if kind not in self._cache:
            name = f"{kind.value}.txt"
            if self._directory is not None:
                raw = (self._directory / name).read_text("utf-8")
            else:
                raw = resources.files("tearmt").joinpath(f"templates/{name}").read_text("utf-8")
            # Template files are newline-terminated on disk; the prompt is not.
            self._cache[kind] = raw[:-1] if raw.endswith("\n") else raw
        return self._cache[kind]


_DEFAULT_LIBRARY = TemplateLibrary()


def _render(kind: PromptKind, values: dict[str, str], templates: TemplateLibrary | None) -> RenderedPrompt:
    library = templates or _DEFAULT_LIBRARY
    template = library.text(kind)

    def fill(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            raise PlaceholderError(f"template {kind.value} has unfilled placeholder {{{key}}}")
        return values[key]

    text = _PLACEHOLDER.sub(fill, template)
    return RenderedPrompt(kind=kind, text=text, placeholders_filled=dict(values))


def _require(value: str, what: str) -> str:
    if not value or not value.strip():
        raise PlaceholderError(f"{what} must be non-empty")
    return value


def select_exemplars(pool: list[Exemplar], k: int, seed: int, pair: LanguagePair) -> ExemplarSet:
    """Draw k exemplars from the pool, deterministically for (pool, k, seed).

    The selection preserves pool order, which is also the prompt order.
    """
    if len(pool) < k:
        raise InsufficientPool(f"pool has {len(pool)} exemplars, need {k}")
    if len(pool) == k:
        chosen = list(pool)
    else:
        rng = random.Random(seed)
        indices = sorted(rng.sample(range(len(pool)), k))
        chosen = [pool[i] for i in indices]
    return ExemplarSet(pair=pair, items=tuple(chosen))


def _exemplar_values(exemplars: ExemplarSet) -> dict[str, str]:
    if len(exemplars) != TRANSLATE_SHOTS:
        raise MissingExemplars(f"few-shot prompts need exactly {TRANSLATE_SHOTS} exemplars, got {len(exemplars)}")
    values: dict[str, str] = {}
    for i, ex in enumerate(exemplars.items, start=1):
        values[f"src_example_{i}"] = _require(ex.source, f"exemplar {i} source")
        values[f"tgt_example_{i}"] = _require(ex.target, f"exemplar {i} target")
    return values


def build_translate_prompt(
    segment: Segment,
    exemplars: ExemplarSet | None = None,
    templates: TemplateLibrary | None = None,
) -> RenderedPrompt:
    """Zero-shot without exemplars, 5-shot with them."""
    values = {
        "src_lan": segment.pair.source_name,
        "tgt_lan": segment.pair.target_name,
        "origin": _require(segment.source_text, "segment source text"),
    }
    if exemplars is None:
        return _render(PromptKind.TRANSLATE_ZERO, values, templates)
    values.update(_exemplar_values(exemplars))
    return _render(PromptKind.TRANSLATE_FEW, values, templates)


def build_estimate_prompt(
    source: str,
    translation: str,
    pair: LanguagePair,
    shots: int = ESTIMATE_SHOTS,
    templates: TemplateLibrary | None = None,
) -> RenderedPrompt:
    """Quality-estimation prompt; the 3-shot variant embeds fixed worked examples."""
    if shots not in (0, ESTIMATE_SHOTS):
        raise PlaceholderError(f"estimate prompts support 0 or {ESTIMATE_SHOTS} shots, got {shots}")
    values = {
        "src_lan": pair.source_name,
        "tgt_lan": pair.target_name,
        "origin": _require(source, "source text"),
        "init_trans": _require(translation, "translation text"),
    }
    kind = PromptKind.ESTIMATE_FEW if shots else PromptKind.ESTIMATE_ZERO
    return _render(kind, values, templates)


def build_refine_prompt(
    variant: str,
    source: str,
    initial: str,
    feedback: str,
    pair: LanguagePair,
    exemplars: ExemplarSet | None = None,
    templates: TemplateLibrary | None = None,
) -> RenderedPrompt:
    """Refinement prompt: alpha uses feedback only, beta adds the exemplars."""
    values = {
        "src_lan": pair.source_name,
        "tgt_lan": pair.target_name,
        "raw_src": _require(source, "source text"),
        "raw_mt": _require(initial, "initial translation"),
        "estimate_fdb": _require(feedback, "estimation feedback"),
    }
    if variant == "alpha":
        return _render(PromptKind.REFINE_ALPHA, values, templates)
    if variant == "beta":
        if exemplars is None:
            raise MissingExemplars("refine beta embeds the translation exemplars; none were given")
        values.update(_exemplar_values(exemplars))
        return _render(PromptKind.REFINE_BETA, values, templates)
    raise PlaceholderError(f"unknown refine variant {variant!r}")


def build_baseline_prompt(
    kind: PromptKind,
    source: str,
    initial: str,
    pair: LanguagePair,
    templates: TemplateLibrary | None = None,
) -> RenderedPrompt:
    """Rewrite prompts for the SCoT and contrastive baselines."""
    if kind not in (PromptKind.SCOT_BASELINE, PromptKind.CONTRASTIVE_BASELINE):
        raise PlaceholderError(f"{kind} is not a baseline prompt kind")
    values = {
        "src_lan": pair.source_name,
        "tgt_lan": pair.target_name,
        "origin": _require(source, "source text"),
        "init_trans": _require(initial, "initial translation"),
    }
    return _render(kind, values, templates)


def _parse_pool(text: str) -> list[Exemplar]:
    pool: list[Exemplar] = []
    for i, line in enumerate(text.splitlines()):
        if i == 0 and line.startswith("source\t"):
            continue
        if not line.strip():
            continue
        source, _, target = line.partition("\t")
        pool.append(Exemplar(source=source, target=target))
    return pool


def load_exemplar_pool(path: Path) -> list[Exemplar]:
    """Read a source/target TSV exemplar pool."""
    return _parse_pool(Path(path).read_text("utf-8"))


def packaged_exemplar_pool(pair: LanguagePair) -> list[Exemplar]:
    """The hand-curated pool shipped for a language pair, if any."""
    ref = resources.files("tearmt").joinpath(f"data/exemplars/{pair.label}.tsv")
    if not ref.is_file():
        raise InsufficientPool(f"no packaged exemplar pool for {pair.label}")
    return _parse_pool(ref.read_text("utf-8"))
