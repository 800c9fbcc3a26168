"""The three-stage translate / estimate / refine loop and its baselines.

One record per segment captures the full trace: initial draft, every
estimation, every refined draft, and an outcome class based on whether the
flagged translation was actually changed. "Changed" means whitespace-trimmed,
internal-whitespace-collapsed string inequality; nothing fuzzier, so the
modified/unmodified accounting stays verifiable.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .core import (
    STAGE_INITIAL,
    STAGE_REFINED,
    ExemplarSet,
    RunConfig,
    Segment,
    TranslationDraft,
    validate_exemplar_set,
    validate_run_config,
)
from .gateway import CompletionRequest, Gateway, GatewayError
from .mqm import EstimationResult, parse_estimation, serialize_feedback
from .prompts import PromptKind, TemplateLibrary, build_baseline_prompt, build_estimate_prompt, build_refine_prompt, build_translate_prompt

OUTCOME_NOT_FLAGGED = "not_flagged"
OUTCOME_FLAGGED_MODIFIED = "flagged_modified"
OUTCOME_FLAGGED_UNMODIFIED = "flagged_unmodified"

BASELINE_IT_ONLY = "it_only"
BASELINE_SCOT = "scot"
BASELINE_CONTRASTIVE = "contrastive"

_FINAL_MARKER = re.compile(r"final translation\s*:\s*", re.IGNORECASE)


@dataclass(frozen=True)
class TearRecord:
    segment_id: str
    initial: TranslationDraft
    estimations: tuple[EstimationResult, ...]
    refined: tuple[TranslationDraft, ...]
    outcome: str
    final_text: str
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExperimentSummary:
    total: int
    flagged: int  # CN
    modified: int  # CM
    unmodified: int  # CU
    execution_rate: float

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "CN": self.flagged,
            "CM": self.modified,
            "CU": self.unmodified,
            "execution_rate": self.execution_rate,
        }


def normalize_text(text: str) -> str:
    return " ".join(text.split())


def clean_translation(text: str) -> str:
    """Strip the prompt's trailing label when the model echoes it back."""
    cleaned = text.strip()
    if cleaned.lower().startswith("target:"):
        cleaned = cleaned[len("target:") :].strip()
    return cleaned


def extract_rewrite(kind: PromptKind, text: str) -> str:
    """Pull the final translation out of a baseline response."""
    if kind is PromptKind.SCOT_BASELINE:
        match = None
        for match in _FINAL_MARKER.finditer(text):
            pass
        if match is not None:
            return clean_translation(text[match.end() :])
    return clean_translation(text)


class Orchestrator:
    """Drives per-segment pipelines through a gateway."""

    def __init__(self, gateway: Gateway, templates: TemplateLibrary | None = None):
        self._gateway = gateway
        self._templates = templates

    # -- single stages, used by the CLI's one-shot subcommands ------------

    def translate(self, segment: Segment, config: RunConfig, exemplars: ExemplarSet | None) -> TranslationDraft:
        few = exemplars if config.translate_shots == 5 else None
        prompt = build_translate_prompt(segment, few, templates=self._templates)
        response = self._gateway.complete(
            CompletionRequest(config.translate_model, prompt.text, config.decoding, tag="translate")
        )
        return TranslationDraft(
            segment_id=segment.id,
            text=clean_translation(response.text),
            stage=STAGE_INITIAL,
            producer_model=config.translate_model,
            prompt_kind=prompt.kind.value,
        )

    def estimate(self, segment: Segment, draft_text: str, config: RunConfig) -> EstimationResult:
        prompt = build_estimate_prompt(
            segment.source_text, draft_text, segment.pair, shots=config.estimate_shots, templates=self._templates
        )
        response = self._gateway.complete(
            CompletionRequest(config.estimate_model, prompt.text, config.decoding, tag="estimate")
        )
        return parse_estimation(response.text)

    def refine(
        self,
        segment: Segment,
        draft_text: str,
        estimation: EstimationResult,
        config: RunConfig,
        exemplars: ExemplarSet | None,
        iteration: int,
    ) -> TranslationDraft:
        feedback = serialize_feedback(estimation)
        prompt = build_refine_prompt(
            config.refine_variant,
            segment.source_text,
            draft_text,
            feedback,
            segment.pair,
            exemplars=exemplars if config.refine_variant == "beta" else None,
            templates=self._templates,
        )
        response = self._gateway.complete(
            CompletionRequest(config.refine_model, prompt.text, config.decoding, tag="refine")
        )
        return TranslationDraft(
            segment_id=segment.id,
            text=clean_translation(response.text),
            stage=STAGE_REFINED,
            producer_model=config.refine_model,
            prompt_kind=prompt.kind.value,
            iteration=iteration,
        )

    # -- full per-segment loop ---------------------------------------------

    def run_tear(self, segment: Segment, config: RunConfig, exemplars: ExemplarSet | None) -> TearRecord:
        """Translate once, then estimate/refine up to config.max_iterations.

        The gate is re-evaluated each round; `config.force_iterations`
        disables early stopping to reproduce fixed-step protocols.
        """
        initial = self.translate(segment, config, exemplars)
        estimations: list[EstimationResult] = []
        refined: list[TranslationDraft] = []
        notes: list[str] = []
        current = initial.text

        for iteration in range(1, config.max_iterations + 1):
            estimation = self.estimate(segment, current, config)
            estimations.append(estimation)
            if not estimation.needs_refinement and not config.force_iterations:
                break
            try:
                draft = self.refine(segment, current, estimation, config, exemplars, iteration)
            except GatewayError as exc:
                notes.append(f"refine iteration {iteration} failed: {exc}")
                break
            refined.append(draft)
            current = draft.text

        final_text = refined[-1].text if refined else initial.text
        if not refined and not any(e.needs_refinement for e in estimations):
            outcome = OUTCOME_NOT_FLAGGED
        elif normalize_text(final_text) != normalize_text(initial.text):
            outcome = OUTCOME_FLAGGED_MODIFIED
        else:
            outcome = OUTCOME_FLAGGED_UNMODIFIED
        return TearRecord(
            segment_id=segment.id,
            initial=initial,
            estimations=tuple(estimations),
            refined=tuple(refined),
            outcome=outcome,
            final_text=final_text,
            notes=tuple(notes),
        )

    def run_tear_iterative(self, segment: Segment, config: RunConfig, exemplars: ExemplarSet | None) -> TearRecord:
        return self.run_tear(segment, config, exemplars)

    def run_baseline(
        self, kind: str, segment: Segment, config: RunConfig, exemplars: ExemplarSet | None
    ) -> TearRecord:
        """IT-only, SCoT, or contrastive rewrite; no estimation gate."""
        initial = self.translate(segment, config, exemplars)
        if kind == BASELINE_IT_ONLY:
            return TearRecord(
                segment_id=segment.id,
                initial=initial,
                estimations=(),
                refined=(),
                outcome=OUTCOME_NOT_FLAGGED,
                final_text=initial.text,
            )
        prompt_kind = {
            BASELINE_SCOT: PromptKind.SCOT_BASELINE,
            BASELINE_CONTRASTIVE: PromptKind.CONTRASTIVE_BASELINE,
        }.get(kind)
        if prompt_kind is None:
            raise ValueError(f"unknown baseline kind {kind!r}")
        prompt = build_baseline_prompt(prompt_kind, segment.source_text, initial.text, segment.pair, self._templates)
        response = self._gateway.complete(
            CompletionRequest(config.refine_model, prompt.text, config.decoding, tag="baseline")
        )
        rewrite = TranslationDraft(
            segment_id=segment.id,
            text=extract_rewrite(prompt_kind, response.text),
            stage=STAGE_REFINED,
            producer_model=config.refine_model,
            prompt_kind=prompt_kind.value,
            iteration=1,
        )
        modified = normalize_text(rewrite.text) != normalize_text(initial.text)
        return TearRecord(
            segment_id=segment.id,
            initial=initial,
            estimations=(),
            refined=(rewrite,),
            outcome=OUTCOME_FLAGGED_MODIFIED if modified else OUTCOME_FLAGGED_UNMODIFIED,
            final_text=rewrite.text,
        )

    def run_experiment(
        self,
        segments: list[Segment],
        config: RunConfig,
        exemplars: ExemplarSet | None,
        parallelism: int = 1,
        baseline: str | None = None,
    ) -> tuple[list[TearRecord], ExperimentSummary]:
        """Run every segment; per-segment failures go into the record notes."""
        validate_run_config(config)
        if exemplars is not None:
            validate_exemplar_set(exemplars, segments)

        def run_one(segment: Segment) -> TearRecord:
            try:
                if baseline:
                    return self.run_baseline(baseline, segment, config, exemplars)
                return self.run_tear(segment, config, exemplars)
            except GatewayError as exc:
                placeholder = TranslationDraft(
                    segment_id=segment.id,
                    text="",
                    stage=STAGE_INITIAL,
                    producer_model=config.translate_model,
                    prompt_kind="",
                )
                return TearRecord(
                    segment_id=segment.id,
                    initial=placeholder,
                    estimations=(),
                    refined=(),
                    outcome=OUTCOME_NOT_FLAGGED,
                    final_text="",
                    notes=(f"segment failed: {exc}",),
                )

        if parallelism <= 1:
            records = [run_one(segment) for segment in segments]
        else:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                records = list(pool.map(run_one, segments))
        return records, summarize(records)


def summarize(records: list[TearRecord]) -> ExperimentSummary:
    flagged = sum(1 for r in records if r.outcome != OUTCOME_NOT_FLAGGED)
    modified = sum(1 for r in records if r.outcome == OUTCOME_FLAGGED_MODIFIED)
    unmodified = sum(1 for r in records if r.outcome == OUTCOME_FLAGGED_UNMODIFIED)
    rate = modified / flagged if flagged else 0.0
    return ExperimentSummary(
        total=len(records),
        flagged=flagged,
        modified=modified,
        unmodified=unmodified,
        execution_rate=rate,
    )
