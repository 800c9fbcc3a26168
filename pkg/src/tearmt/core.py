"""Shared domain types for the translate / estimate / refine pipeline.

Pure value types plus their validation functions. No I/O lives here;
serialization is in :mod:`tearmt.corpus`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace


class TearError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TearError):
    """A run configuration violates one of its invariants."""


class UnknownLanguage(TearError):
    """A language code has no registered display name."""


#: ISO-639-1 codes of the ten languages supported out of the box, mapped to
#: the display names used inside prompts.
LANGUAGE_NAMES: dict[str, str] = {
    "en": "English",
    "fr": "French",
    "de": "German",
    "cs": "Czech",
    "is": "Icelandic",
    "zh": "Chinese",
    "ja": "Japanese",
    "ru": "Russian",
    "uk": "Ukrainian",
    "he": "Hebrew",
}


def register_language(code: str, name: str) -> None:
    """Extend the supported language set with an extra code -> name entry."""
    LANGUAGE_NAMES[code.lower()] = name


def language_name(code: str) -> str:
    try:
        return LANGUAGE_NAMES[code.lower()]
    except KeyError:
        raise UnknownLanguage(f"no display name registered for language code {code!r}")


@dataclass(frozen=True)
class LanguagePair:
    """A source -> target translation direction, e.g. zh -> en."""

    source_lang: str
    target_lang: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_lang", self.source_lang.lower())
        object.__setattr__(self, "target_lang", self.target_lang.lower())

    @property
    def label(self) -> str:
        return f"{self.source_lang}-{self.target_lang}"

    @property
    def source_name(self) -> str:
        return language_name(self.source_lang)

    @property
    def target_name(self) -> str:
        return language_name(self.target_lang)


def validate_language_pair(pair: LanguagePair, allowed_codes: set[str] | None = None) -> LanguagePair:
    """Check pair invariants; `allowed_codes` defaults to the built-in ten."""
    codes = allowed_codes if allowed_codes is not None else set(LANGUAGE_NAMES)
    if not pair.source_lang or not pair.target_lang:
        raise ConfigError("language codes must be non-empty")
    if pair.source_lang == pair.target_lang:
        raise ConfigError(f"source and target language must differ, got {pair.label}")
    for code in (pair.source_lang, pair.target_lang):
        if code not in codes:
            raise ConfigError(f"language code {code!r} is not in the configured set")
    return pair


@dataclass(frozen=True)
class Segment:
    """One test item: a source sentence with optional reference."""

    id: str
    pair: LanguagePair
    source_text: str
    reference_text: str | None = None
    doc_id: str | None = None


def validate_segment(segment: Segment) -> Segment:
    if not segment.id:
        raise ConfigError("segment id must be non-empty")
    if not segment.source_text.strip():
        raise ConfigError(f"segment {segment.id!r} has an empty source text")
    return segment


@dataclass(frozen=True)
class Exemplar:
    """One source/target demonstration pair used for few-shot prompting."""

    source: str
    target: str


@dataclass(frozen=True)
class ExemplarSet:
    """An ordered, fixed selection of exemplars for one language pair."""

    pair: LanguagePair
    items: tuple[Exemplar, ...]

    def __len__(self) -> int:
        return len(self.items)


def validate_exemplar_set(exemplars: ExemplarSet, test_segments: list[Segment] | None = None) -> ExemplarSet:
    """Check exemplar invariants, including the test-set leakage guard."""
    if test_segments is not None:
        test_sources = {seg.source_text.strip() for seg in test_segments}
        for ex in exemplars.items:
            if ex.source.strip() in test_sources:
                raise ConfigError(f"exemplar source leaks into the test set: {ex.source[:60]!r}")
    return exemplars


STAGE_INITIAL = "initial"
STAGE_REFINED = "refined"


@dataclass(frozen=True)
class TranslationDraft:
    """A translation produced at one stage of the pipeline.

    `iteration` is None for the initial draft and >= 1 for refined drafts;
    consecutive numbering is enforced at the record level.
    """

    segment_id: str
    text: str
    stage: str
    producer_model: str
    prompt_kind: str
    iteration: int | None = None


def validate_draft(draft: TranslationDraft) -> TranslationDraft:
    if draft.stage not in (STAGE_INITIAL, STAGE_REFINED):
        raise ConfigError(f"unknown draft stage {draft.stage!r}")
    if draft.stage == STAGE_INITIAL and draft.iteration is not None:
        raise ConfigError("initial drafts carry no iteration number")
    if draft.stage == STAGE_REFINED and (draft.iteration is None or draft.iteration < 1):
        raise ConfigError("refined drafts need an iteration number >= 1")
    return draft


@dataclass(frozen=True)
class Decoding:
    """Decoding parameters forwarded to the model provider."""

    temperature: float = 0.0
    max_tokens: int = 1024


REFINE_ALPHA = "alpha"
REFINE_BETA = "beta"

TRANSLATE_SHOT_CHOICES = (0, 5)
ESTIMATE_SHOT_CHOICES = (0, 3)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines one pipeline run over a test set.

    The three model fields may differ, which is how cross-model correction
    runs are expressed; there is no separate cross-model code path.
    """

    translate_model: str
    estimate_model: str
    refine_model: str
    translate_shots: int = 5
    estimate_shots: int = 3
    refine_variant: str = REFINE_BETA
    max_iterations: int = 1
    force_iterations: bool = False
    sample_seed: int = 0
    decoding: Decoding = field(default_factory=Decoding)


def validate_run_config(config: RunConfig) -> RunConfig:
    """Return `config` unchanged iff every invariant holds."""
    for name in ("translate_model", "estimate_model", "refine_model"):
        if not getattr(config, name):
            raise ConfigError(f"{name} must be non-empty")
    if config.translate_shots not in TRANSLATE_SHOT_CHOICES:
        raise ConfigError(f"translate_shots must be one of {TRANSLATE_SHOT_CHOICES}, got {config.translate_shots}")
    if config.estimate_shots not in ESTIMATE_SHOT_CHOICES:
        raise ConfigError(f"estimate_shots must be one of {ESTIMATE_SHOT_CHOICES}, got {config.estimate_shots}")
    if config.refine_variant not in (REFINE_ALPHA, REFINE_BETA):
        raise ConfigError(f"refine_variant must be alpha or beta, got {config.refine_variant!r}")
    if config.refine_variant == REFINE_BETA and config.translate_shots != 5:
        raise ConfigError("refine_variant beta embeds the few-shot exemplars and requires translate_shots=5")
    if config.max_iterations < 1:
        raise ConfigError("max_iterations must be >= 1")
    if config.decoding.temperature < 0:
        raise ConfigError("temperature must be >= 0")
    if config.decoding.max_tokens < 1:
        raise ConfigError("max_tokens must be >= 1")
    return config


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    """Functional update helper used by the CLI."""
    return replace(config, **changes)
