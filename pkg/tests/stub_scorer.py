#!/usr/bin/env python3
"""Minimal scorer-bridge stub for client tests: wire protocol over stdio.

Scores are deterministic functions of the request so tests can predict them:
`--constant X` returns X everywhere, `--len-scaled` returns
len(candidate)/100. `--swap-pairs` answers every two requests in reverse
order to exercise client-side reordering (use even batch sizes).
"""

import argparse
import json
import sys

METRICS = ["comet22", "cometkiwi", "bleurt20"]


def score_for(args, record):
    if args.len_scaled:
        return len(record.get("candidate", "")) / 100.0
    return args.constant


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--constant", type=float, default=0.5)
    parser.add_argument("--len-scaled", action="store_true")
    parser.add_argument("--swap-pairs", action="store_true")
    args = parser.parse_args()

    out = sys.stdout
    out.write(json.dumps({"protocol_version": 1, "metrics_available": METRICS}) + "\n")
    out.flush()

    held = None
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            out.write(json.dumps({"id": None, "error": "malformed request line"}) + "\n")
            out.flush()
            continue
        if record.get("metric") not in METRICS:
            reply = {"id": record.get("id"), "error": f"unknown metric {record.get('metric')!r}"}
        else:
            reply = {"id": record.get("id"), "score": score_for(args, record)}
        if args.swap_pairs:
            if held is None:
                held = reply
                continue
            out.write(json.dumps(reply) + "\n")
            out.write(json.dumps(held) + "\n")
            held = None
        else:
            out.write(json.dumps(reply) + "\n")
        out.flush()
    if held is not None:
        out.write(json.dumps(held) + "\n")
        out.flush()


if __name__ == "__main__":
    main()
