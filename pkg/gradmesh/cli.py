"""
Command-line entry point.

    gradmesh run --config configs/default.toml --set strategy.name=spirt --format md
    gradmesh sweep --config configs/default.toml --key workers --values 2 4 8
    gradmesh costcheck

Exit codes: 0 success, 1 runtime/protocol error, 2 usage/config error.
"""

import argparse
import sys
from pathlib import Path

from loguru import logger

from gradmesh.core.config import settings
from gradmesh.core.constants import EVENTS_OUT_LIMIT
from gradmesh.core.exceptions import ConfigurationError, GradmeshError
from gradmesh.core.logging import configure_logging
from gradmesh.core.version import __version__
from gradmesh.models.metrics import ReportFormat
from gradmesh.services.cost import run_cost_regression
from gradmesh.services.harness import (
    SWEEP_KEYS,
    epochs_to_csv,
    load_config,
    result_to_json,
    run_instrumented,
    run_sweep,
)
from gradmesh.services.reporting import (
    costcheck_csv,
    costcheck_json,
    render_costcheck,
    render_report,
    sweep_csv,
    write_text,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML experiment configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key (dotted section.key), repeatable",
    )
    parser.add_argument("--seed", type=int, default=None, help="Override the experiment seed")
    parser.add_argument("--out", type=Path, default=None, help=f"Output directory (default: {settings.OUTPUT_DIR})")
    parser.add_argument(
        "--format", dest="fmt", choices=[f.value for f in ReportFormat], default=ReportFormat.MARKDOWN.value
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradmesh", description="Distributed SGD aggregation workflows simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run one experiment")
    _add_common(run)
    run.add_argument("--counters-out", type=Path, default=None, help="Write the final traffic counters as JSON")
    run.add_argument(
        "--events-out",
        type=Path,
        default=None,
        help=f"Write the per-op event log as JSON lines (keeps GRADMESH_EVENT_LOG_LIMIT ops, or {EVENTS_OUT_LIMIT})",
    )
    run.set_defaults(handler=cmd_run)

    sweep = subparsers.add_parser("sweep", help="Re-run an experiment over a list of values")
    _add_common(sweep)
    sweep.add_argument("--key", required=True, choices=SWEEP_KEYS)
    sweep.add_argument("--values", required=True, nargs="+")
    sweep.set_defaults(handler=cmd_sweep)

    costcheck = subparsers.add_parser("costcheck", help="Reproduce the published cost table")
    costcheck.add_argument(
        "--format", dest="fmt", choices=[f.value for f in ReportFormat], default=ReportFormat.MARKDOWN.value
    )
    costcheck.add_argument("--out", type=Path, default=None)
    costcheck.set_defaults(handler=cmd_costcheck)
    return parser


def _out_dir(args: argparse.Namespace) -> Path:
    return args.out if args.out is not None else Path(settings.OUTPUT_DIR)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.overrides, args.seed)
    event_log_limit = (settings.EVENT_LOG_LIMIT or EVENTS_OUT_LIMIT) if args.events_out is not None else None
    result, setup = run_instrumented(cfg, event_log_limit=event_log_limit)
    fmt = ReportFormat(args.fmt)
    out = _out_dir(args)
    report = render_report([result], fmt)
    write_text(out, "result.json", result_to_json(result))
    write_text(out, "epochs.csv", epochs_to_csv(result))
    write_text(out, f"report.{fmt.value}", report)
    if args.counters_out is not None:
        write_text(args.counters_out.parent, args.counters_out.name, setup.world.dump_counters_json() + "\n")
    if args.events_out is not None:
        write_text(args.events_out.parent, args.events_out.name, setup.world.events_jsonl())
    sys.stdout.write(report)
    logger.info(f"Wrote result.json, epochs.csv and report.{fmt.value} to {out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    base = load_config(args.config, args.overrides, args.seed)
    rows, results = run_sweep(base, args.key, args.values)
    fmt = ReportFormat(args.fmt)
    out = _out_dir(args)
    report = render_report(results, fmt)
    write_text(out, "sweep.csv", sweep_csv(rows))
    write_text(out, f"report.{fmt.value}", report)
    sys.stdout.write(report)
    logger.info(f"Sweep over {args.key} finished: {len(rows)} rows in {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_costcheck(args: argparse.Namespace) -> int:
    checks = run_cost_regression()
    fmt = ReportFormat(args.fmt)
    if fmt == ReportFormat.JSON:
        text = costcheck_json(checks)
    elif fmt == ReportFormat.CSV:
        text = costcheck_csv(checks)
    else:
        text = render_costcheck(checks)
    if args.out is not None:
        write_text(args.out, f"costcheck.{fmt.value}", text)
    sys.stdout.write(text)
    failed = [f"{c.row.framework} {c.row.model}" for c in checks if not c.as_expected]
    if failed:
        logger.error(f"Cost rows not behaving as flagged: {', '.join(failed)}")
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()
    try:
        return args.handler(args)
    except ConfigurationError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_USAGE
    except GradmeshError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
