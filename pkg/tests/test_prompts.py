import re

import pytest

from tearmt.core import Exemplar, LanguagePair, Segment
from tearmt.prompts import (
    InsufficientPool,
    MissingExemplars,
    PlaceholderError,
    PromptKind,
    TemplateLibrary,
    build_baseline_prompt,
    build_estimate_prompt,
    build_refine_prompt,
    build_translate_prompt,
    packaged_exemplar_pool,
    select_exemplars,
)

from conftest import ZH_EN, make_exemplars

HE_EN = LanguagePair("he", "en")

_ALL_PLACEHOLDERS = re.compile(
    r"\{(src_lan|tgt_lan|origin|init_trans|raw_src|raw_mt|estimate_fdb|src_example_\d|tgt_example_\d)\}"
)


def make_segment(source="我惊愕了，音质竟然是环绕3D立体！"):
    return Segment(id="1", pair=ZH_EN, source_text=source)


class TestSelectExemplars:
    def test_k_equals_pool_keeps_order(self):
        pool = [Exemplar(f"s{i}", f"t{i}") for i in range(5)]
        chosen = select_exemplars(pool, 5, seed=99, pair=ZH_EN)
        assert [e.source for e in chosen.items] == [f"s{i}" for i in range(5)]

    def test_deterministic_for_seed(self):
        pool = [Exemplar(f"s{i}", f"t{i}") for i in range(100)]
        first = select_exemplars(pool, 5, seed=7, pair=ZH_EN)
        second = select_exemplars(pool, 5, seed=7, pair=ZH_EN)
        assert first == second

    def test_small_pool_rejected(self):
        pool = [Exemplar(f"s{i}", f"t{i}") for i in range(3)]
        with pytest.raises(InsufficientPool):
            select_exemplars(pool, 5, seed=0, pair=ZH_EN)

    def test_selection_preserves_pool_order(self):
        pool = [Exemplar(f"s{i}", f"t{i}") for i in range(20)]
        chosen = select_exemplars(pool, 5, seed=3, pair=ZH_EN)
        indices = [int(e.source[1:]) for e in chosen.items]
        assert indices == sorted(indices)


class TestTranslatePrompt:
    def test_zero_shot_wording_and_tail(self):
        prompt = build_translate_prompt(make_segment())
        assert prompt.kind is PromptKind.TRANSLATE_ZERO
        assert "Please provide the English translation for the Chinese sentences" in prompt.text
        assert "我惊愕了，音质竟然是环绕3D立体！" in prompt.text
        assert prompt.text.endswith("Source: 我惊愕了，音质竟然是环绕3D立体！ \nTarget:")

    def test_few_shot_has_five_exemplar_pairs(self):
        prompt = build_translate_prompt(make_segment(), make_exemplars())
        assert prompt.kind is PromptKind.TRANSLATE_FEW
        assert len(re.findall(r"Source: .+ Target: .+", prompt.text)) == 5
        assert prompt.text.index("Example:") < prompt.text.index("例句1。")
        assert prompt.text.rstrip().endswith("Target:")

    def test_empty_source_rejected(self):
        with pytest.raises(PlaceholderError):
            build_translate_prompt(make_segment(source="   "))

    def test_wrong_exemplar_count_rejected(self):
        exemplars = make_exemplars()
        short = type(exemplars)(pair=exemplars.pair, items=exemplars.items[:3])
        with pytest.raises(MissingExemplars):
            build_translate_prompt(make_segment(), short)

    def test_rendering_is_pure(self):
        a = build_translate_prompt(make_segment(), make_exemplars())
        b = build_translate_prompt(make_segment(), make_exemplars())
        assert a.text == b.text


class TestEstimatePrompt:
    def test_zero_shot_contains_severity_definitions(self):
        prompt = build_estimate_prompt("源", "hyp", ZH_EN, shots=0)
        assert "Each error is classified as one of three categories: critical, major, and minor" in prompt.text
        assert prompt.text.endswith("MQM annotations:")

    def test_three_shot_embeds_worked_examples(self):
        prompt = build_estimate_prompt("מקור", "hyp", HE_EN, shots=3)
        assert 'critical: accuracy/addition - "of high-speed rail"' in prompt.text
        assert prompt.text.count("MQM annotations:") == 4  # three examples plus the query block
        assert prompt.text.endswith("MQM annotations:")

    def test_empty_translation_rejected(self):
        with pytest.raises(PlaceholderError):
            build_estimate_prompt("源", "", ZH_EN, shots=0)


class TestRefinePrompt:
    def test_alpha_has_defects_clause_and_no_exemplars(self):
        prompt = build_refine_prompt("alpha", "src", "hyp", "critical: no-error", ZH_EN)
        assert "I'm not satisfied with this target, because some defects exist: critical: no-error" in prompt.text
        assert "Example:" not in prompt.text
        assert "native English speaker" in prompt.text

    def test_beta_has_exemplars_and_defects_clause(self):
        prompt = build_refine_prompt("beta", "src", "hyp", "fdb", ZH_EN, exemplars=make_exemplars())
        assert "Example:" in prompt.text
        assert "Now, let's focus on the following Chinese-English translation pair." in prompt.text
        assert "some defects exist: fdb" in prompt.text

    def test_beta_without_exemplars_rejected(self):
        with pytest.raises(MissingExemplars):
            build_refine_prompt("beta", "src", "hyp", "fdb", ZH_EN)

    def test_empty_feedback_rejected(self):
        with pytest.raises(PlaceholderError):
            build_refine_prompt("alpha", "src", "hyp", "", ZH_EN)


class TestBaselinePrompt:
    def test_contrastive_labels_previous_translation_bad(self):
        prompt = build_baseline_prompt(PromptKind.CONTRASTIVE_BASELINE, "src", "old hyp", ZH_EN)
        assert "Bad Target: old hyp" in prompt.text

    def test_scot_asks_for_suggestions_then_rewrite(self):
        prompt = build_baseline_prompt(PromptKind.SCOT_BASELINE, "src", "old hyp", ZH_EN)
        assert prompt.text.index("Suggestions:") > prompt.text.index("Target: old hyp")
        assert "Final translation:" in prompt.text

    def test_empty_source_rejected(self):
        with pytest.raises(PlaceholderError):
            build_baseline_prompt(PromptKind.SCOT_BASELINE, "", "hyp", ZH_EN)


class TestNoUnfilledPlaceholders:
    def test_every_kind_renders_clean(self):
        exemplars = make_exemplars()
        segment = make_segment()
        rendered = [
            build_translate_prompt(segment),
            build_translate_prompt(segment, exemplars),
            build_estimate_prompt("s", "h", ZH_EN, 0),
            build_estimate_prompt("s", "h", ZH_EN, 3),
            build_refine_prompt("alpha", "s", "h", "f", ZH_EN),
            build_refine_prompt("beta", "s", "h", "f", ZH_EN, exemplars=exemplars),
            build_baseline_prompt(PromptKind.SCOT_BASELINE, "s", "h", ZH_EN),
            build_baseline_prompt(PromptKind.CONTRASTIVE_BASELINE, "s", "h", ZH_EN),
        ]
        assert {p.kind for p in rendered} == set(PromptKind)
        for prompt in rendered:
            assert not _ALL_PLACEHOLDERS.search(prompt.text), prompt.kind


class TestPackagedPools:
    @pytest.mark.parametrize("pair", [ZH_EN, LanguagePair("en", "de"), HE_EN, LanguagePair("en", "ru")])
    def test_shipped_pools_support_five_shot(self, pair):
        pool = packaged_exemplar_pool(pair)
        assert len(pool) >= 5
        chosen = select_exemplars(pool, 5, seed=0, pair=pair)
        assert len(chosen) == 5

    def test_missing_pool_raises(self):
        with pytest.raises(InsufficientPool):
            packaged_exemplar_pool(LanguagePair("fr", "ja"))


class TestTemplateLibraryOverride:
    def test_alternative_directory(self, tmp_path):
        (tmp_path / "translate_zero.txt").write_text("XX {src_lan}->{tgt_lan}: {origin}\n", encoding="utf-8")
        library = TemplateLibrary(tmp_path)
        prompt = build_translate_prompt(make_segment("好"), templates=library)
        assert prompt.text == "XX Chinese->English: 好"
