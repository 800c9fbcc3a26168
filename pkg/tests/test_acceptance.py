"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one PASS line (visible under ``pytest -s`` or in captured
output) and enforces its wall-clock budget. All criteria run against the
scripted mock provider and the scorer stub; no network access is needed.
"""

from __future__ import annotations

import filecmp
import random
import time
from pathlib import Path

import httpx
import pytest

from tearmt.cli import EXIT_OK, main
from tearmt.core import RunConfig
from tearmt.corpus import load_run
from tearmt.metrics import (
    RankingVector,
    bleu,
    kendall_tau,
    make_eval_table,
    pairwise_accuracy,
    ranking_correlation,
    win_tie_loss,
)
from tearmt.mqm import (
    HIERARCHY,
    ErrorAnnotation,
    ErrorCategory,
    EstimationResult,
    mqm_score,
    parse_estimation,
    serialize_feedback,
)
from tearmt.orchestrator import Orchestrator
from tearmt.pref import SessionStore
from tearmt.prefserver import make_server, serve_forever_in_thread
from tearmt.prompts import PromptKind, TemplateLibrary

from conftest import (
    NO_ERROR_FEEDBACK,
    ONE_MINOR_FEEDBACK,
    PipelineScript,
    make_exemplars,
    make_segments,
    mock_gateway,
)
from test_metrics import (
    FIXTURE_BLEU,
    FIXTURE_CANDIDATES,
    FIXTURE_REFERENCES,
    oracle_kendall,
    oracle_pairwise_accuracy,
    random_table,
)
from test_pref import archive_pair

FIXTURES = Path(__file__).parent / "fixtures"


class _Budget:
    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is None:
            assert elapsed < self.seconds, f"{self.name} took {elapsed:.2f}s (budget {self.seconds}s)"
            print(f"ACCEPTANCE PASS: {self.name} ({elapsed:.2f}s)")
        else:
            print(f"ACCEPTANCE FAIL: {self.name}")
        return False


def _annotation_keys(result):
    return [(a.severity, a.category.top, a.category.sub, a.span) for a in result.annotations]


def test_parser_fixtures_match_template_examples():
    with _Budget("parser fixtures (three worked MQM examples)", 1.0):
        text = TemplateLibrary().text(PromptKind.ESTIMATE_FEW)
        blocks = {}
        for name, nxt in (("Example1", "Example2"), ("Example2", "Example3"), ("Example3", None)):
            start = text.index(f"{name}:")
            end = text.index(f"{nxt}:") if nxt else text.index("{src_lan} source:")
            chunk = text[start:end]
            blocks[name] = chunk[chunk.index("MQM annotations:") + len("MQM annotations:") :]

        example1 = parse_estimation(blocks["Example1"])
        assert _annotation_keys(example1) == [
            ("critical", "accuracy", "addition", "of high-speed rail"),
            ("major", "accuracy", "mistranslation", "go to the reviews"),
            ("minor", "style", "awkward", "etc.,"),
        ]
        example2 = parse_estimation(blocks["Example2"])
        assert _annotation_keys(example2) == [
            ("major", "accuracy", "mistranslation", "involvement"),
            ("major", "accuracy", "omission", "the account holder"),
            ("minor", "fluency", "grammar", "wäre"),
            ("minor", "fluency", "register", "dir"),
        ]
        example3 = parse_estimation(blocks["Example3"])
        assert _annotation_keys(example3) == [
            ("major", "accuracy", "addition", "ve Vídni"),
            ("major", "accuracy", "omission", "the stop-start"),
            ("minor", "terminology", "inappropriate_for_context", "partake"),
        ]


def _random_estimation(rng: random.Random) -> EstimationResult:
    categories = [
        ErrorCategory(top, sub) for top, subs in sorted(HIERARCHY.items()) for sub in sorted(subs)
    ] + [ErrorCategory("other"), ErrorCategory("source_error")]
    severities = ["critical", "major", "minor"]
    span_chars = "abcdefgh XYZ 得力09.,/-'!?"
    annotations = []
    for _ in range(rng.randint(0, 5)):
        span = None
        if rng.random() < 0.8:
            span = "".join(rng.choice(span_chars) for _ in range(rng.randint(1, 24))).strip()
            span = span or None
        annotations.append(ErrorAnnotation(rng.choice(severities), rng.choice(categories), span))
    order = {"critical": 0, "major": 1, "minor": 2}
    annotations.sort(key=lambda a: order[a.severity])
    return EstimationResult(
        annotations=tuple(annotations),
        needs_refinement=bool(annotations),
        raw_text="",
    )


def test_round_trip_law_on_randomized_results():
    with _Budget("round-trip law (1000 randomized estimation results)", 5.0):
        rng = random.Random(20240613)
        for _ in range(1000):
            result = _random_estimation(rng)
            reparsed = parse_estimation(serialize_feedback(result))
            assert _annotation_keys(reparsed) == _annotation_keys(result)
            assert reparsed.needs_refinement == result.needs_refinement


def test_gate_economy_over_200_segment_mock_run():
    with _Budget("gate economy (200-segment mock run)", 10.0):
        flagged = {f"s{i:03d}" for i in range(1, 95)}  # CN = 94
        modified = {f"s{i:03d}" for i in range(1, 78)}  # CM = 77, CU = 17
        script = PipelineScript(
            translate=lambda sid: f"T-{sid}",
            estimate=lambda sid, rnd: ONE_MINOR_FEEDBACK if sid in flagged else NO_ERROR_FEEDBACK,
            refine=lambda sid, rnd, draft: f"R-{sid}" if sid in modified else draft,
        )
        gateway = mock_gateway(script)
        config = RunConfig(translate_model="m", estimate_model="m", refine_model="m")
        records, summary = Orchestrator(gateway).run_experiment(
            make_segments(200), config, make_exemplars()
        )
        refine_calls = len(gateway.calls_with_tag("refine"))
        assert refine_calls == sum(len(r.refined) for r in records) == 94
        assert (summary.flagged, summary.modified, summary.unmodified) == (94, 77, 17)
        assert summary.flagged == summary.modified + summary.unmodified
        assert summary.execution_rate == pytest.approx(77 / 94)


def test_meta_eval_oracles():
    with _Budget("meta-eval oracles (1000 random tables + 1000 kendall inputs)", 30.0):
        rng = random.Random(99)
        for trial in range(1000):
            n_systems = rng.randint(2, 10)
            metric, human = random_table(rng, n_systems, rng.randint(1, 5), tie_prone=trial % 4 == 0)
            table = make_eval_table(metric, human)
            metric_means = {s: sum(table.metric[s].values()) / len(table.segments) for s in table.systems}
            human_means = {s: sum(table.human[s].values()) / len(table.segments) for s in table.systems}
            assert pairwise_accuracy(table) == oracle_pairwise_accuracy(metric_means, human_means)

        for trial in range(1000):
            n = rng.randint(2, 8)
            pool = [float(v) for v in range(3)] if trial % 2 else [rng.uniform(-9, 9) for _ in range(n)]
            a = [rng.choice(pool) for _ in range(n)]
            b = [rng.choice(pool) for _ in range(n)]
            for variant in ("tau_a", "tau_b", "tau_c"):
                degenerate = variant != "tau_a" and (len(set(a)) == 1 or len(set(b)) == 1)
                if degenerate:
                    continue
                assert kendall_tau(a, b, variant) == pytest.approx(
                    oracle_kendall(a, b, variant), abs=1e-12
                )


def test_ranking_correlation_reproduction():
    with _Budget("ranking-correlation reproduction (4 language pairs)", 1.0):
        models = ("gpt-3.5-turbo", "gemini-pro", "claude-2")
        # Translation ranks come from the few-shot translation quality table;
        # evaluation ranks from the system-level MQM meta-evaluation table.
        translation_ranks = {
            "en-ru": (2, 3, 1),
            "en-de": (1, 2, 3),
            "he-en": (3, 2, 1),
            "zh-en": (1, 3, 2),
        }
        evaluation_ranks = {
            "en-ru": (2, 3, 1),
            "en-de": (3, 1, 2),
            "he-en": (3, 2, 1),
            "zh-en": (1, 3, 2),
        }
        expected = {"en-ru": 1.0, "en-de": -0.33, "he-en": 1.0, "zh-en": 1.0}
        for pair, want in expected.items():
            got = ranking_correlation(
                RankingVector(models, translation_ranks[pair]),
                RankingVector(models, evaluation_ranks[pair]),
            )
            assert got == pytest.approx(want, abs=0.01), pair


class _J:
    def __init__(self, pair_id, choice):
        self.pair_id = pair_id
        self.choice = choice


def test_preference_tally_reproduces_35_89_76():
    with _Budget("preference tally (200 judgments -> 35/89/76)", 1.0):
        rng = random.Random(4096)
        truth = ["zero-shot"] * 35 + ["tie"] * 89 + ["few-shot"] * 76
        rng.shuffle(truth)
        side_map = {}
        judgments = []
        for i, winner in enumerate(truth):
            pair_id = f"p{i:03d}"
            sides = ("zero-shot", "few-shot") if rng.random() < 0.5 else ("few-shot", "zero-shot")
            side_map[pair_id] = sides
            if winner == "tie":
                judgments.append(_J(pair_id, "tie"))
            else:
                judgments.append(_J(pair_id, "A" if sides[0] == winner else "B"))
        tally = win_tie_loss(judgments, side_map)
        assert tally.wins["zero-shot"] == 35
        assert tally.ties == 89
        assert tally.wins["few-shot"] == 76
        assert tally.total == 200


def test_bleu_against_reference_oracle():
    with _Budget("BLEU vs independently recorded oracle", 1.0):
        assert bleu(FIXTURE_CANDIDATES, FIXTURE_REFERENCES) == pytest.approx(FIXTURE_BLEU, abs=0.01)
        assert round(bleu(FIXTURE_CANDIDATES, FIXTURE_CANDIDATES), 2) == 100.00


def _run_tear_cli(out: Path, parallelism: int) -> None:
    code = main(
        [
            "tear",
            "--testset", str(FIXTURES / "testset_zhen_20.tsv"),
            "--pair", "zh-en",
            "--mode", "replay",
            "--cache", str(FIXTURES / "replay_cache.jsonl"),
            "--translate-model", "frozen-model",
            "--label", "tear",
            "--parallelism", str(parallelism),
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK


def test_end_to_end_replay_determinism(tmp_path):
    with _Budget("end-to-end replay determinism (2 runs x parallelism 1 and 8)", 30.0):
        out = {}
        for name, parallelism in (("p1a", 1), ("p1b", 1), ("p8a", 8), ("p8b", 8)):
            out[name] = tmp_path / name
            _run_tear_cli(out[name], parallelism)
        files = ["manifest.json", "records.jsonl", "scores.json", "summary.json", "extras.json", "SHA256SUMS"]
        for name in ("p1b", "p8a", "p8b"):
            match, mismatch, errors = filecmp.cmpfiles(out["p1a"], out[name], files, shallow=False)
            assert mismatch == [] and errors == [], (name, mismatch, errors)


def test_iterative_protocol():
    with _Budget("iterative protocol (early stop vs forced steps)", 5.0):
        def build_script():
            return PipelineScript(
                translate=lambda sid: "T1",
                estimate=lambda sid, rnd: ONE_MINOR_FEEDBACK if rnd <= 2 else NO_ERROR_FEEDBACK,
                refine=lambda sid, rnd, draft: f"T{rnd + 1}",
            )

        segment = make_segments(1)[0]
        exemplars = make_exemplars()

        config = RunConfig(
            translate_model="m", estimate_model="m", refine_model="m", max_iterations=5
        )
        record = Orchestrator(mock_gateway(build_script())).run_tear(segment, config, exemplars)
        assert len(record.refined) == 2
        assert len(record.estimations) == 3

        forced = RunConfig(
            translate_model="m", estimate_model="m", refine_model="m",
            max_iterations=5, force_iterations=True,
        )
        record = Orchestrator(mock_gateway(build_script())).run_tear(segment, forced, exemplars)
        assert len(record.refined) == 5


def test_mqm_scoring_table_and_monotonicity():
    with _Budget("MQM scoring (50-case table + 1000-list monotonicity)", 5.0):
        rng = random.Random(777)
        category = ErrorCategory("accuracy", "omission")
        for _ in range(50):
            n_crit = rng.randint(0, 3)
            n_major = rng.randint(0, 4)
            n_minor = rng.randint(0, 6)
            annotations = (
                [ErrorAnnotation("critical", category)] * n_crit
                + [ErrorAnnotation("major", category)] * n_major
                + [ErrorAnnotation("minor", category)] * n_minor
            )
            raw = -(25 * n_crit + 5 * n_major + 1 * n_minor)
            uncapped = mqm_score(annotations, weights={"critical": 25, "major": 5, "minor": 1})
            assert uncapped.value == raw
            capped = mqm_score(annotations, weights={"critical": 25, "major": 5, "minor": 1}, cap=25)
            assert capped.value == max(-25, raw)
            assert capped.capped == (raw < -25)

        for _ in range(1000):
            annotations = [
                ErrorAnnotation(rng.choice(["critical", "major", "minor"]), category)
                for _ in range(rng.randint(0, 8))
            ]
            extra = annotations + [ErrorAnnotation(rng.choice(["critical", "major", "minor"]), category)]
            assert mqm_score(extra).value <= mqm_score(annotations).value
            with_cap = mqm_score(extra, cap=25)
            assert -25 <= with_cap.value <= mqm_score(annotations, cap=25).value + 1e-12


def test_report_shape_on_bundled_archive():
    with _Budget("ablation report shape on the bundled archive", 1.0):
        from tearmt.reports import render_report

        archive = load_run(FIXTURES / "ablation_archive")
        table = render_report(archive, "ablation")
        assert table.columns == ("Variant", "BLEU", "COMET", "COMETKiwi", "BLEURT")
        it_row, variant_row = table.rows
        assert it_row[0] == "IT"
        assert all("(" not in cell for cell in it_row[1:])  # IT row is absolute scores
        for cell in variant_row[1:]:
            assert "(" in cell and cell.rstrip(")").rsplit("(", 1)[1][0] in "+-"
        # Spot-check the arithmetic on the committed numbers.
        assert variant_row[2] == "80.70 (+0.39)"
        assert variant_row[1] == "26.41 (+0.11)"


def test_secondary_preference_flow_over_real_http(tmp_path):
    with _Budget("preference flow (20-task session over live HTTP)", 30.0):
        store = SessionStore(tmp_path / "sessions")
        server = make_server(store, admin_token="tok")
        serve_forever_in_thread(server)
        try:
            host, port = server.server_address[:2]
            base = f"http://{host}:{port}"
            from tearmt.corpus import save_run

            a, b = archive_pair(20)
            save_run(a, tmp_path / "a")
            save_run(b, tmp_path / "b")

            with httpx.Client(timeout=10) as client:
                created = client.post(
                    f"{base}/sessions",
                    json={
                        "archive_a": str(tmp_path / "a"),
                        "archive_b": str(tmp_path / "b"),
                        "seed": 7,
                        "annotators": ["sim"],
                    },
                )
                assert created.status_code == 201
                session_id = created.json()["session_id"]
                assert created.json()["task_count"] == 20

                # Ground truth: the simulated annotator prefers beta-run on
                # even-numbered pairs, alpha-run on multiples of five, and
                # ties elsewhere. The oracle is unblinded via the store.
                side_map = store.side_map(session_id)

                def truth_for(pair_id: str) -> str:
                    n = int(pair_id[1:])
                    if n % 5 == 0:
                        return "alpha-run"
                    if n % 2 == 0:
                        return "beta-run"
                    return "tie"

                expected = {"alpha-run": 0, "beta-run": 0, "tie": 0}
                completed = 0
                while True:
                    task = client.get(
                        f"{base}/sessions/{session_id}/next", params={"annotator": "sim"}
                    ).json()
                    if task.get("done"):
                        break
                    blob = str(task)
                    assert "alpha-run" not in blob and "beta-run" not in blob and "side" not in blob
                    winner = truth_for(task["pair_id"])
                    expected[winner if winner == "tie" else winner] += 1
                    if winner == "tie":
                        choice = "tie"
                    else:
                        choice = "A" if side_map[task["pair_id"]][0] == winner else "B"
                    reply = client.post(
                        f"{base}/sessions/{session_id}/judgments",
                        json={"pair_id": task["pair_id"], "choice": choice, "annotator_id": "sim"},
                    )
                    assert reply.status_code == 200
                    completed += 1
                    # Duplicate submissions must be rejected.
                    dup = client.post(
                        f"{base}/sessions/{session_id}/judgments",
                        json={"pair_id": task["pair_id"], "choice": choice, "annotator_id": "sim"},
                    )
                    assert dup.status_code == 409

                assert completed == 20
                tally = client.get(
                    f"{base}/sessions/{session_id}/tally", headers={"X-Admin-Token": "tok"}
                ).json()
                assert tally["wins"]["alpha-run"] == expected["alpha-run"]
                assert tally["wins"]["beta-run"] == expected["beta-run"]
                assert tally["ties"] == expected["tie"]
                assert tally["total"] == 20
        finally:
            server.shutdown()
            server.server_close()
