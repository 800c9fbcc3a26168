"""Command-line entry point for the scorer bridge."""

from __future__ import annotations

import argparse
import sys

from .protocol import ALL_METRICS
from .scoring import ModelUnavailable, RealScorer, StubScorer
from .server import serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtscorer", description=__doc__)
    parser.add_argument("--tcp", type=int, metavar="PORT", help="serve on TCP instead of stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument(
        "--metrics",
        default=",".join(ALL_METRICS),
        help="comma-separated metrics to load (default: all)",
    )
    parser.add_argument("--stub", action="store_true", help="deterministic stub mode; no models loaded")
    parser.add_argument("--stub-constant", type=float, default=0.5)
    parser.add_argument("--stub-table", metavar="JSON", help="digest-keyed score table for stub mode")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=8)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in ALL_METRICS]
    if unknown:
        print(f"unknown metrics: {', '.join(unknown)}", file=sys.stderr)
        return 1

    if args.stub:
        if args.stub_table:
            scorer = StubScorer.from_table_file(args.stub_table, constant=args.stub_constant)
        else:
            scorer = StubScorer(constant=args.stub_constant)
    else:
        scorer = RealScorer(metrics, device=args.device, batch_size=args.batch_size)
        try:
            scorer.preload()
        except ModelUnavailable as exc:
            print(f"cannot start: {exc}", file=sys.stderr)
            return 2

    if args.tcp is not None:
        serve_tcp(scorer, args.host, args.tcp, metrics)
    else:
        serve_stdio(scorer, metrics)
    return 0


if __name__ == "__main__":
    sys.exit(main())
