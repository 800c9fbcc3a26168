#!/usr/bin/env python3
"""Normalize an upstream human-annotation MQM dump into the simplified schema.

The upstream per-rating TSV (google sheet style) has columns like
``system doc doc_id seg_id rater source target category severity`` with the
error span marked inline in the target as ``<v>span</v>``. This script emits
the simplified schema consumed by the pipeline loader:

    system  segment_id  severity  category  span

Rules:
* severity is lowercased; ``neutral`` ratings (weight zero) and explicit
  ``no-error`` rows become ``no-error`` markers;
* rows with an empty severity and category are treated as missing
  annotations and emitted as ``missing`` markers;
* the span is the first ``<v>...</v>`` run in the target, if any;
* duplicate (system, segment, rater) structure is preserved one row per
  error; downstream aggregation handles the rest.

Usage: convert_mqm_dump.py upstream.tsv > simplified.tsv
"""

from __future__ import annotations

import argparse
import re
import sys

SPAN = re.compile(r"<v>(.*?)</v>", re.DOTALL)

SEVERITY_MAP = {
    "critical": "critical",
    "major": "major",
    "minor": "minor",
    "neutral": "no-error",
    "no-error": "no-error",
    "noerror": "no-error",
    "no_error": "no-error",
}


def convert(lines, out) -> int:
    header = next(lines).rstrip("\n").split("\t")
    index = {name.strip().lower(): i for i, name in enumerate(header)}

    def col(row, *names):
        for name in names:
            i = index.get(name)
            if i is not None and i < len(row):
                return row[i]
        return ""

    out.write("system\tsegment_id\tseverity\tcategory\tspan\n")
    written = 0
    for line_no, line in enumerate(lines, start=2):
        if not line.strip():
            continue
        row = line.rstrip("\n").split("\t")
        system = col(row, "system")
        segment_id = col(row, "seg_id", "segment_id")
        if not system or not segment_id:
            print(f"warning: line {line_no}: no system/segment id; skipped", file=sys.stderr)
            continue
        severity_raw = col(row, "severity").strip().lower()
        category = col(row, "category").strip()
        if not severity_raw and not category:
            out.write(f"{system}\t{segment_id}\tmissing\t\t\n")
            written += 1
            continue
        severity = SEVERITY_MAP.get(severity_raw)
        if severity is None:
            print(f"warning: line {line_no}: unknown severity {severity_raw!r}; skipped", file=sys.stderr)
            continue
        if severity == "no-error":
            out.write(f"{system}\t{segment_id}\tno-error\t\t\n")
            written += 1
            continue
        match = SPAN.search(col(row, "target"))
        span = match.group(1).replace("\t", " ").replace("\n", " ") if match else ""
        category = category.replace("\t", " ")
        out.write(f"{system}\t{segment_id}\t{severity}\t{category}\t{span}\n")
        written += 1
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("input", help="upstream MQM ratings TSV")
    parser.add_argument("--out", default="-", help="output path (default stdout)")
    args = parser.parse_args(argv)

    with open(args.input, encoding="utf-8") as fh:
        lines = iter(fh)
        if args.out == "-":
            convert(lines, sys.stdout)
        else:
            with open(args.out, "w", encoding="utf-8") as out:
                convert(lines, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
