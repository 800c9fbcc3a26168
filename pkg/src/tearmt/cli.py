"""Command-line front end composing the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data error, 3 provider/bridge error.
Every run subcommand writes its manifest before issuing any model call.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bridge as bridge_mod
from .core import ConfigError, Decoding, LanguagePair, RunConfig, TearError, validate_run_config
from .corpus import (
    FORMAT_TSV,
    FormatError,
    RunArchive,
    load_mqm_dump,
    load_run,
    load_testset,
    make_manifest,
    sample_testset,
    save_run,
    summary_to_dict,
)
from .gateway import (
    Gateway,
    GatewayError,
    HttpChatProvider,
    MockProvider,
    ProviderConfig,
    ResponseCache,
)
from .metrics import kendall_tau_all, make_eval_table, pairwise_accuracy
from .mqm import DEFAULT_CAP, DEFAULT_WEIGHTS, load_human_mqm
from .orchestrator import Orchestrator
from .prompts import TemplateLibrary, load_exemplar_pool, packaged_exemplar_pool, select_exemplars
from .pref import SessionStore
from .prefserver import make_server

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _pair(text: str) -> LanguagePair:
    source, _, target = text.partition("-")
    if not source or not target:
        raise argparse.ArgumentTypeError(f"language pair must look like zh-en, got {text!r}")
    return LanguagePair(source, target)


def _add_gateway_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=("mock", "replay", "live"), default="replay")
    parser.add_argument("--cache", type=Path, help="response cache file (JSONL)")
    parser.add_argument("--save-cache", type=Path, help="export the cache here after the run")
    parser.add_argument("--mock-script", type=Path, help="JSON map of request digest -> response text")
    parser.add_argument("--providers", type=Path, help="provider config JSON for live mode")
    parser.add_argument("--templates", type=Path, help="alternative prompt template directory")


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--translate-model", default="mock-model")
    parser.add_argument("--estimate-model", default=None, help="defaults to the translate model")
    parser.add_argument("--refine-model", default=None, help="defaults to the translate model")
    parser.add_argument("--translate-shots", type=int, default=5, choices=(0, 5))
    parser.add_argument("--estimate-shots", type=int, default=3, choices=(0, 3))
    parser.add_argument("--refine-variant", choices=("alpha", "beta"), default="beta")
    parser.add_argument("--max-iterations", type=int, default=1)
    parser.add_argument("--force-iterations", action="store_true")
    parser.add_argument("--sample-seed", type=int, default=0)
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--max-tokens", type=int, default=1024)


def _add_testset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--testset", type=Path, required=True)
    parser.add_argument("--format", dest="fmt", choices=("tsv", "parallel_text"), default=FORMAT_TSV)
    parser.add_argument("--pair", type=_pair, required=True, help="language pair, e.g. zh-en")
    parser.add_argument("--references", type=Path, help="reference file for parallel_text format")
    parser.add_argument("--exemplar-pool", type=Path, help="exemplar TSV; defaults to the packaged pool")
    parser.add_argument("--exemplar-seed", type=int, default=0)


def _config_from_args(args) -> RunConfig:
    return validate_run_config(
        RunConfig(
            translate_model=args.translate_model,
            estimate_model=args.estimate_model or args.translate_model,
            refine_model=args.refine_model or args.translate_model,
            translate_shots=args.translate_shots,
            estimate_shots=args.estimate_shots,
            refine_variant=args.refine_variant,
            max_iterations=args.max_iterations,
            force_iterations=args.force_iterations,
            sample_seed=args.sample_seed,
            decoding=Decoding(temperature=args.temperature, max_tokens=args.max_tokens),
        )
    )


def _config_to_dict(config: RunConfig) -> dict:
    return {
        "translate_model": config.translate_model,
        "estimate_model": config.estimate_model,
        "refine_model": config.refine_model,
        "translate_shots": config.translate_shots,
        "estimate_shots": config.estimate_shots,
        "refine_variant": config.refine_variant,
        "max_iterations": config.max_iterations,
        "force_iterations": config.force_iterations,
        "sample_seed": config.sample_seed,
        "decoding": {"temperature": config.decoding.temperature, "max_tokens": config.decoding.max_tokens},
    }


def _build_gateway(args) -> Gateway:
    cache = ResponseCache()
    if args.cache and Path(args.cache).exists():
        cache.import_file(args.cache)
    if args.mode == "replay":
        return Gateway(mode="replay", cache=cache)
    if args.mode == "mock":
        script = {}
        if args.mock_script:
            script = json.loads(Path(args.mock_script).read_text("utf-8"))
        provider = MockProvider(script=script)
        return Gateway(mode="mock", cache=cache, providers={"mock": provider})
    if not args.providers:
        raise ConfigError("live mode needs --providers")
    blob = json.loads(Path(args.providers).read_text("utf-8"))
    providers = {}
    rate_limits = {}
    for name, spec in blob.get("providers", {}).items():
        config = ProviderConfig(
            base_url=spec["base_url"], api_key_env=spec["api_key_env"], rpm=int(spec.get("rpm", 60))
        )
        providers[name] = HttpChatProvider(config)
        rate_limits[name] = config.rpm
    return Gateway(
        mode="live",
        cache=cache,
        providers=providers,
        model_routes=blob.get("model_routes", {}),
        rate_limits=rate_limits,
    )


def _load_inputs(args):
    testset = load_testset(args.testset, fmt=args.fmt, pair=args.pair, reference_path=args.references)
    if args.exemplar_pool:
        pool = load_exemplar_pool(args.exemplar_pool)
    else:
        pool = packaged_exemplar_pool(args.pair)
    exemplars = select_exemplars(pool, 5, args.exemplar_seed, args.pair)
    return testset, exemplars


def _run_and_save(args, baseline: str | None) -> int:
    config = _config_from_args(args)
    testset, exemplars = _load_inputs(args)
    out = Path(args.out)
    manifest = make_manifest(
        _config_to_dict(config),
        paths={
            "testset": str(args.testset),
            "exemplar_pool": str(args.exemplar_pool) if args.exemplar_pool else f"packaged:{args.pair.label}",
            "cache": str(args.cache) if args.cache else "",
        },
        label=args.label or (baseline or "tear"),
    )
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )

    gateway = _build_gateway(args)
    templates = TemplateLibrary(args.templates) if args.templates else None
    orchestrator = Orchestrator(gateway, templates)
    records, summary = orchestrator.run_experiment(
        list(testset.segments), config, exemplars, parallelism=args.parallelism, baseline=baseline
    )
    archive = RunArchive(
        manifest=manifest,
        records=records,
        scores={},
        summary=summary_to_dict(summary),
        extras={
            "sources": {seg.id: seg.source_text for seg in testset.segments},
            "references": {seg.id: seg.reference_text for seg in testset.segments if seg.reference_text},
        },
    )
    save_run(archive, out)
    if args.save_cache:
        gateway.cache.export(args.save_cache)
    print(f"wrote archive to {out} ({summary.as_dict()})")
    return EXIT_OK


# -- single-stage subcommands --------------------------------------------------


def _cmd_translate(args) -> int:
    config = _config_from_args(args)
    testset, exemplars = _load_inputs(args)
    gateway = _build_gateway(args)
    orchestrator = Orchestrator(gateway, TemplateLibrary(args.templates) if args.templates else None)
    with open(args.out, "w", encoding="utf-8") as fh:
        for segment in testset.segments:
            draft = orchestrator.translate(segment, config, exemplars if config.translate_shots else None)
            fh.write(json.dumps({"segment_id": segment.id, "text": draft.text}, ensure_ascii=False) + "\n")
    if args.save_cache:
        gateway.cache.export(args.save_cache)
    print(f"wrote {len(testset.segments)} drafts to {args.out}")
    return EXIT_OK


def _read_drafts(path: Path) -> dict[str, str]:
    drafts = {}
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            payload = json.loads(line)
            drafts[payload["segment_id"]] = payload["text"]
    return drafts


def _cmd_estimate(args) -> int:
    config = _config_from_args(args)
    testset, _ = _load_inputs(args)
    drafts = _read_drafts(args.drafts)
    gateway = _build_gateway(args)
    orchestrator = Orchestrator(gateway, TemplateLibrary(args.templates) if args.templates else None)
    from .corpus import estimation_to_dict

    with open(args.out, "w", encoding="utf-8") as fh:
        for segment in testset.segments:
            if segment.id not in drafts:
                raise FormatError(f"no draft for segment {segment.id!r}")
            estimation = orchestrator.estimate(segment, drafts[segment.id], config)
            fh.write(
                json.dumps(
                    {"segment_id": segment.id, "estimation": estimation_to_dict(estimation)}, ensure_ascii=False
                )
                + "\n"
            )
    if args.save_cache:
        gateway.cache.export(args.save_cache)
    print(f"wrote estimations to {args.out}")
    return EXIT_OK


def _cmd_refine(args) -> int:
    config = _config_from_args(args)
    testset, exemplars = _load_inputs(args)
    drafts = _read_drafts(args.drafts)
    from .corpus import estimation_from_dict

    estimations = {}
    for line in Path(args.estimations).read_text("utf-8").splitlines():
        if line.strip():
            payload = json.loads(line)
            estimations[payload["segment_id"]] = estimation_from_dict(payload["estimation"])
    gateway = _build_gateway(args)
    orchestrator = Orchestrator(gateway, TemplateLibrary(args.templates) if args.templates else None)
    with open(args.out, "w", encoding="utf-8") as fh:
        for segment in testset.segments:
            estimation = estimations.get(segment.id)
            if estimation is None or not estimation.needs_refinement:
                continue
            draft = orchestrator.refine(segment, drafts[segment.id], estimation, config, exemplars, iteration=1)
            fh.write(json.dumps({"segment_id": segment.id, "text": draft.text}, ensure_ascii=False) + "\n")
    if args.save_cache:
        gateway.cache.export(args.save_cache)
    print(f"wrote refinements to {args.out}")
    return EXIT_OK


# -- scoring and analysis --------------------------------------------------------


def _open_bridge(args) -> bridge_mod.ScorerBridge:
    if args.bridge_spawn:
        import shlex

        return bridge_mod.ScorerBridge.spawn(shlex.split(args.bridge_spawn))
    if args.bridge_tcp:
        host, _, port = args.bridge_tcp.partition(":")
        return bridge_mod.ScorerBridge.connect(host, int(port))
    raise ConfigError("scoring neural metrics needs --bridge-spawn or --bridge-tcp")


def _cmd_score(args) -> int:
    archive = load_run(args.archive)
    references = archive.extras.get("references", {})
    ordered = list(archive.records)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]

    corpus_scores = archive.scores.setdefault("corpus", {})
    segment_scores = archive.scores.setdefault("segment", {})
    bridge = None
    for metric in metrics:
        if metric == "bleu":
            refs = [references.get(r.segment_id, "") for r in ordered]
            if any(not ref for ref in refs):
                raise FormatError("bleu needs a reference for every segment (archive extras)")
            from .metrics import bleu

            corpus_scores["bleu"] = {
                "initial": bleu([r.initial.text for r in ordered], refs),
                "final": bleu([r.final_text for r in ordered], refs),
            }
            continue
        if bridge is None:
            bridge = _open_bridge(args)
        sources = archive.extras.get("sources", {})
        per_stage: dict[str, dict[str, float]] = {"initial": {}, "final": {}}
        for stage, texts in (
            ("initial", [r.initial.text for r in ordered]),
            ("final", [r.final_text for r in ordered]),
        ):
            items = [
                bridge_mod.ScoreItem(
                    candidate=text,
                    source=sources.get(r.segment_id),
                    reference=references.get(r.segment_id),
                )
                for r, text in zip(ordered, texts)
            ]
            values = bridge.score(metric, items)
            per_stage[stage] = {r.segment_id: v for r, v in zip(ordered, values)}
        segment_scores[metric] = per_stage
        corpus_scores[metric] = {
            "initial": sum(per_stage["initial"].values()) / len(ordered),
            "final": sum(per_stage["final"].values()) / len(ordered),
        }
    if bridge is not None:
        bridge.close()
    save_run(archive, args.archive)
    print(f"scored {', '.join(metrics)}; archive updated")
    return EXIT_OK


def _cmd_meta_eval(args) -> int:
    rows = load_mqm_dump(args.mqm_dump)
    human_table = load_human_mqm(rows, weights=DEFAULT_WEIGHTS, cap=DEFAULT_CAP if args.cap else None)
    human: dict[str, dict[str, float]] = {}
    for (system, segment_id), score in human_table.scores.items():
        human.setdefault(system, {})[segment_id] = score.value

    metric: dict[str, dict[str, float]] = {}
    for line_no, line in enumerate(Path(args.metric_scores).read_text("utf-8").splitlines(), start=1):
        if line_no == 1 and line.startswith("system\t"):
            continue
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) < 3:
            raise FormatError(f"{args.metric_scores}:{line_no}: need system<TAB>segment_id<TAB>score")
        metric.setdefault(cells[0], {})[cells[1]] = float(cells[2])

    table = make_eval_table(metric, human)
    accuracy = pairwise_accuracy(table)
    metric_flat = [table.metric[s][seg] for s in table.systems for seg in table.segments]
    human_flat = [table.human[s][seg] for s in table.systems for seg in table.segments]
    kendall = kendall_tau_all(metric_flat, human_flat)
    print(f"systems: {len(table.systems)}, segments per system: {len(table.segments)}")
    print(f"excluded (missing annotations): {human_table.excluded}")
    print(f"system-level pairwise accuracy: {accuracy * 100:.2f}%")
    for variant in ("tau_a", "tau_b", "tau_c", "average"):
        print(f"segment-level kendall {variant}: {kendall[variant] * 100:.2f}%")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .reports import render_report

    archive = load_run(args.archive)
    table = render_report(archive, args.kind)
    sys.stdout.write(table.to_text())
    if args.tsv_out:
        Path(args.tsv_out).write_text(table.to_tsv(), encoding="utf-8")
        print(f"tsv written to {args.tsv_out}")
    return EXIT_OK


def _cmd_sample(args) -> int:
    testset = load_testset(args.testset, fmt=args.fmt, pair=args.pair, reference_path=args.references)
    sampled = sample_testset(testset, args.n, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("id\tsource\treference\tdoc_id\n")
        for seg in sampled.segments:
            fh.write(f"{seg.id}\t{seg.source_text}\t{seg.reference_text or ''}\t{seg.doc_id or ''}\n")
    print(f"sampled {len(sampled.segments)} of {len(testset.segments)} segments to {args.out}")
    return EXIT_OK


def _cmd_cache(args) -> int:
    cache = ResponseCache()
    if args.cache_action == "export":
        cache.import_file(args.cache)
        count = cache.export(args.out)
        print(f"exported {count} cache records to {args.out}")
    else:
        if Path(args.cache).exists():
            cache.import_file(args.cache)
        added = cache.import_file(args.merge)
        cache.export(args.cache)
        print(f"imported {added} new records into {args.cache}")
    return EXIT_OK


def _cmd_serve_pref(args) -> int:
    token = os.environ.get(args.admin_token_env, "")
    store = SessionStore(args.store)
    server = make_server(store, admin_token=token, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    print(f"preference backend listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="tearmt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, baseline in (("tear", None), ("baseline", "set-below")):
        p = sub.add_parser(name, help=f"run the {'full pipeline' if baseline is None else 'baseline'} over a test set")
        _add_testset_args(p)
        _add_config_args(p)
        _add_gateway_args(p)
        p.add_argument("--out", type=Path, required=True, help="archive output directory")
        p.add_argument("--label", default="")
        p.add_argument("--parallelism", type=int, default=1)
        if name == "baseline":
            p.add_argument("--kind", choices=("it_only", "scot", "contrastive"), required=True)

    p = sub.add_parser("translate", help="produce initial drafts only")
    _add_testset_args(p)
    _add_config_args(p)
    _add_gateway_args(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("estimate", help="estimate existing drafts")
    _add_testset_args(p)
    _add_config_args(p)
    _add_gateway_args(p)
    p.add_argument("--drafts", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("refine", help="refine flagged drafts")
    _add_testset_args(p)
    _add_config_args(p)
    _add_gateway_args(p)
    p.add_argument("--drafts", type=Path, required=True)
    p.add_argument("--estimations", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("score", help="attach metric scores to an archive")
    p.add_argument("--archive", type=Path, required=True)
    p.add_argument("--metrics", default="bleu")
    p.add_argument("--bridge-spawn", help="command line that starts a scorer bridge on stdio")
    p.add_argument("--bridge-tcp", help="host:port of a running scorer bridge")

    p = sub.add_parser("meta-eval", help="metric meta-evaluation against human MQM")
    p.add_argument("--metric-scores", type=Path, required=True, help="tsv: system, segment_id, score")
    p.add_argument("--mqm-dump", type=Path, required=True)
    p.add_argument("--cap", action="store_true", help="cap MQM scores at the default cap")

    p = sub.add_parser("report", help="render a report from an archive")
    p.add_argument("--archive", type=Path, required=True)
    p.add_argument("--kind", choices=("ablation", "error_type", "cnm_cu", "meta_eval", "preference"), required=True)
    p.add_argument("--tsv-out", type=Path)

    p = sub.add_parser("sample", help="deterministic test set sampling")
    p.add_argument("--testset", type=Path, required=True)
    p.add_argument("--format", dest="fmt", choices=("tsv", "parallel_text"), default=FORMAT_TSV)
    p.add_argument("--pair", type=_pair, required=True)
    p.add_argument("--references", type=Path)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("cache", help="export or import response caches")
    p.add_argument("cache_action", choices=("export", "import"))
    p.add_argument("--cache", type=Path, required=True)
    p.add_argument("--out", type=Path, help="destination for export")
    p.add_argument("--merge", type=Path, help="source file for import")

    p = sub.add_parser("serve-pref", help="serve the preference annotation API")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--admin-token-env", default="TEARMT_ADMIN_TOKEN")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "tear":
            return _run_and_save(args, baseline=None)
        if args.command == "baseline":
            return _run_and_save(args, baseline=args.kind)
        if args.command == "translate":
            return _cmd_translate(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "refine":
            return _cmd_refine(args)
        if args.command == "score":
            return _cmd_score(args)
        if args.command == "meta-eval":
            return _cmd_meta_eval(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "cache":
            return _cmd_cache(args)
        if args.command == "serve-pref":
            return _cmd_serve_pref(args)
        parser.error(f"unknown command {args.command!r}")
    except (GatewayError, bridge_mod.BridgeUnavailable, bridge_mod.ProtocolError) as exc:
        print(f"provider/bridge error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except TearError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
