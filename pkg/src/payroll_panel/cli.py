"""Command-line entry point: ``payroll-panel synth`` and ``payroll-panel compute``.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from payroll_panel.core import MissingQuarter, Quarter
from payroll_panel.indicators import GrowthConfig, InvalidGrowthConfig, missing_year_quarters
from payroll_panel.ingest import HeaderMismatch, canonicalize_frame, read_payroll_table
from payroll_panel.report import compute_document
from payroll_panel.synth import InvalidConfig, generate_panel, load_scenario, preset

EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2
MAX_LISTED_ERRORS = 10


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="payroll-panel", description="Matched payroll panel indicators")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic payroll panel as CSV")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--preset", help="named scenario (baseline, high_churn, retirement_wave, pt_to_ft_penalty)")
    src.add_argument("--config", type=Path, help="scenario file (YAML or JSON)")
    s.add_argument("--seed", type=int, help="overrides the scenario seed")
    s.add_argument("--n-workers", type=int)
    s.add_argument("--n-quarters", type=int)
    s.add_argument("--out", type=Path, help="output CSV (default: stdout)")

    c = sub.add_parser("compute", help="compute the indicator report for one quarter")
    c.add_argument("--in", dest="input", type=Path, required=True, help="payroll CSV or JSONL file")
    c.add_argument("--input-format", choices=("csv", "jsonl"), help="default: from the file extension")
    c.add_argument("--quarter", type=Quarter.parse, required=True, help="report quarter, e.g. 2016Q1")
    c.add_argument("--config", type=Path, help="growth config file (YAML or JSON)")
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--holder-match", choices=("strict", "endpoints"))
    c.add_argument("--floor", type=int, help="small-cell floor")
    c.add_argument("--max-reject-rate", type=float, default=0.01)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out", type=Path, help="output file (default: stdout)")
    return parser


def _err(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_synth(args) -> int:
    try:
        if args.config:
            cfg = load_scenario(args.config)
        else:
            cfg = preset(args.preset or "baseline")
        overrides = {k: v for k, v in (("seed", args.seed), ("n_workers", args.n_workers),
                                       ("n_quarters", args.n_quarters)) if v is not None}
        if overrides:
            cfg = cfg.replace(**overrides)
    except InvalidConfig as exc:
        for name, message in exc.errors:
            _err(f"{name}: {message}")
        return EXIT_INVALID
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    panel = generate_panel(cfg)
    try:
        _write(panel.to_csv(), args.out)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def _growth_config(args) -> GrowthConfig:
    data = {}
    if args.config:
        loaded = yaml.safe_load(args.config.read_text())
        if loaded is not None and not isinstance(loaded, dict):
            raise InvalidGrowthConfig("config file must contain a mapping")
        data.update(loaded or {})
    if args.holder_match:
        data["holder_match_mode"] = args.holder_match
    if args.floor is not None:
        data["small_cell_floor"] = args.floor
    return GrowthConfig.from_mapping(data)


def cmd_compute(args) -> int:
    try:
        cfg = _growth_config(args)
    except (InvalidGrowthConfig, TypeError, yaml.YAMLError) as exc:
        _err(f"config: {exc}")
        return EXIT_INVALID
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO

    try:
        parsed = read_payroll_table(args.input, args.input_format)
    except HeaderMismatch as exc:
        _err(str(exc))
        return EXIT_INVALID
    except (OSError, UnicodeDecodeError) as exc:
        _err(str(exc))
        return EXIT_IO

    if parsed.errors:
        rate = len(parsed.errors) / max(parsed.raw_rows, 1)
        print(f"rejected {len(parsed.errors)} of {parsed.raw_rows} rows ({rate:.2%})", file=sys.stderr)
        for e in parsed.errors[:MAX_LISTED_ERRORS]:
            print(f"  row {e.row}: {e.reason}", file=sys.stderr)
        if rate > args.max_reject_rate:
            _err(f"reject rate {rate:.2%} exceeds --max-reject-rate {args.max_reject_rate:.2%}")
            return EXIT_INVALID

    panel = canonicalize_frame(parsed.frame, parse_rejected=len(parsed.errors),
                               source_digest=parsed.source_digest)
    t = args.quarter
    try:
        panel.require([t.prev(), t])
    except MissingQuarter as exc:
        _err(str(exc))
        return EXIT_INVALID
    gaps = missing_year_quarters(panel, t)
    if gaps:
        print("warning: year-over-year indicators left empty; missing quarters: "
              + ", ".join(str(q) for q in gaps), file=sys.stderr)

    doc = compute_document(panel, t, cfg, workers=args.workers)
    try:
        _write(doc.encode(args.format), args.out)
    except OSError as exc:
        _err(str(exc))
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        return cmd_synth(args)
    return cmd_compute(args)


if __name__ == "__main__":
    sys.exit(main())
