"""Command line entry point.

Exit codes: 0 success, 1 usage or schema error, 2 a numerical contract in the
report was violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .scenarios import DEFAULTS, KINDS, ScenarioError, emit_figure_data, load_scenario, run_scenario

OUT_DIR_ENV = "LOPSIM_OUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lopsim", description="Linear-optics gate scenario runner")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config and write its report")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=None,
                     help=f"output directory (default ${OUT_DIR_ENV} or the current directory)")
    run.add_argument("--csv", action="append", default=[], metavar="SERIES",
                     help="also write this series as CSV; may be repeated")
    val = sub.add_parser("validate", help="check a scenario config against the schema")
    val.add_argument("config", type=Path)
    sub.add_parser("list-scenarios", help="list scenario kinds and their default parameters")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    if args.command == "list-scenarios":
        for kind in KINDS:
            print(f"{kind}\t{json.dumps(DEFAULTS[kind], sort_keys=True)}")
        return EXIT_OK

    try:
        scenario = load_scenario(args.config)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "validate":
        print(f"{args.config}: ok ({scenario.kind})")
        return EXIT_OK

    report = run_scenario(scenario)
    unknown = [s for s in args.csv if s not in report.series]
    if unknown:
        print(f"error: unknown series {', '.join(unknown)}; available: "
              f"{', '.join(sorted(report.series))}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = args.out or Path(os.environ.get(OUT_DIR_ENV, "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / f"{scenario.name}.json"
    report_path.write_text(report.to_json() + "\n")
    for series in args.csv:
        (out_dir / f"{scenario.name}_{series}.csv").write_text(emit_figure_data(report, series))

    for name, r in report.results.items():
        status = "PASS" if r["ok"] else "FAIL"
        print(f"{status} {name}: {r['value']!r} (expected {r['expected']!r} +/- {r['tolerance']!r})")
    for event in report.events:
        print(f"event: {json.dumps(event, sort_keys=True)}")
    print(f"report: {report_path}")
    return EXIT_OK if report.ok else EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
