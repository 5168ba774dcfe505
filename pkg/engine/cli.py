import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv

import pipeline
import reports
from config import DATA_DIR, RunConfig, __version__, log_level_from_env
from errors import ConfigError, EngineError, StageError, TableFormatError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

PUBLISHED_TABLE = DATA_DIR / "table3_published.csv"


def configure_logging() -> None:
    logging.basicConfig(
        level=log_level_from_env(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _csv_list(value: str) -> List[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _window_list(value: str) -> List[int]:
    try:
        return [int(v) for v in _csv_list(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"windows must be integers: '{value}'") from None


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, type=Path, help="JSONL or CSV corpus")
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--out", required=True, type=Path, help="artifact directory")
    parser.add_argument("--groups", type=_csv_list, help="only keep these groups (comma-separated)")
    parser.add_argument("--no-spam-filter", action="store_true", help="skip spam author detection")
    parser.add_argument("--no-query-filter", action="store_true", help="skip the concept/context query")
    parser.add_argument("--prune-min", type=int, help="minimum edge weight kept after pruning")
    parser.add_argument("--workers", type=int, help="thread pool size (default: SBS_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbs-engine",
        description="Importance of core value orientations per stakeholder group (Semantic Brand Score)",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="score a corpus and write all artifacts")
    _add_run_arguments(run)
    run.add_argument("--window", type=int, help="co-occurrence window")

    report = commands.add_parser("report", help="render the tables of a finished run")
    report.add_argument("--out", type=Path, help="artifact directory of a run")
    report.add_argument("--format", choices=("csv", "json", "markdown"), default="markdown")
    report.add_argument("--save", type=Path, help="also write the rendering to this file")
    report.add_argument("--schema", action="store_true", help="print the JSON schema of the json format")

    validate = commands.add_parser("validate", help="check published SBS shares against the mean of component shares")
    validate.add_argument("--table", type=Path, default=PUBLISHED_TABLE, help="importance-table CSV")
    validate.add_argument("--tolerance", type=float, default=pipeline.RECONSTRUCTION_TOLERANCE)
    validate.add_argument("--save", type=Path, help="write the reconstruction report as JSON")

    sweep = commands.add_parser("sweep", help="rerun at several windows and compare SBS shares")
    _add_run_arguments(sweep)
    sweep.add_argument("--windows", required=True, type=_window_list, help="e.g. 5,7")
    return parser


def _load_config(args: argparse.Namespace, window: Optional[int] = None) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    return cfg.override(
        window=window,
        prune_min=args.prune_min,
        spam_filter=False if args.no_spam_filter else None,
        query_filter=False if args.no_query_filter else None,
        groups=tuple(args.groups) if args.groups else None,
        output_dir=args.out,
    )


def _print_run_summary(result: pipeline.RunResult) -> None:
    manifest = result.manifest
    print(f"Artifacts written to {result.output_dir}")
    print(f"Documents kept: {result.exclusion['kept']} of {result.exclusion['total']}")
    for warning in manifest.warnings:
        print(f"Warning: {warning}")
    for name, outcome in result.groups.items():
        top = ", ".join(
            f"{r.orientation} {r.share_sbs:.2f}%"
            for r in sorted(outcome.results, key=lambda r: (-r.share_sbs, r.orientation))
        )
        print(f"  {name} ({outcome.documents} docs): {top}")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args, window=args.window)
    result = asyncio.run(pipeline.run(args.corpus, cfg, workers=args.workers))
    _print_run_summary(result)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    runs = asyncio.run(pipeline.window_sweep(args.corpus, cfg, args.windows))
    print(f"Window sweep {sorted(runs)} written to {cfg.output_dir / 'window_robustness.csv'}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    if args.schema:
        text = json.dumps(reports.report_schema(), indent=2, sort_keys=True) + "\n"
    else:
        if args.out is None:
            raise ConfigError("report needs --out <artifact dir> (or --schema)")
        try:
            tables = reports.load_report_tables(args.out)
        except FileNotFoundError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAILURE
        text = reports.render(tables, args.format)
    if args.save:
        args.save.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    if not args.table.is_file():
        print(f"error: table not found: {args.table}", file=sys.stderr)
        return EXIT_USAGE
    result = pipeline.validate_table3(args.table, tolerance=args.tolerance)
    if args.save:
        reports.write_json(result.model_dump(mode="json"), args.save)
    print(f"Cells checked: {len(result.cells)}; max |delta| = {result.max_delta:.2f}; flagged: {result.flagged}")
    for cell in result.cells:
        if cell.flagged:
            print(
                f"  {cell.orientation} x {cell.group}: published {cell.published_sbs:.2f}, "
                f"mean of shares {cell.reconstructed_sbs:.2f}"
            )
    return EXIT_FAILURE if result.flagged else EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "report": cmd_report,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except TableFormatError as e:
        print(f"malformed table: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except EngineError as e:
        logger.error(f"Unexpected engine error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
