"""runs: list stored benchmark runs or re-render one of them."""

import argparse
import sys

from bench.report import plot_report, render_report
from commands.common import add_json_flag, emit
from config import GlobalConfig
from db.database import DEFAULT_DB_PATH, ResultStore


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    async with ResultStore(args.results_db) as store:
        if not args.run_id:
            runs = await store.list_runs()
            text = "\n".join(
                f"{r['run_id']}  {r['created_at']}  {'valid' if r['valid'] else 'INVALID'}  {r['outcomes']} outcomes"
                for r in runs
            ) or "no stored runs"
            emit({"runs": runs}, args.json, text)
            return 0

        report = await store.get_report(args.run_id)
        if args.plot:
            plot_report(report, args.plot)
        if args.outcomes:
            emit({"run_id": args.run_id, "outcomes": await store.get_outcomes(args.run_id)}, True)
        elif args.json:
            emit(report.to_dict(), True)
        else:
            sys.stdout.write(render_report(report, args.format))
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("runs", help="inspect stored benchmark runs", description=__doc__)
    parser.add_argument("--results-db", default=DEFAULT_DB_PATH, help="SQLite result store")
    parser.add_argument("--run-id", help="show this run instead of listing")
    parser.add_argument("--format", choices=["markdown", "csv", "json"], default="markdown")
    parser.add_argument("--outcomes", action="store_true", help="print the per-question outcomes as JSON")
    parser.add_argument("--plot", help="write an accuracy bar chart PNG")
    add_json_flag(parser)
    parser.set_defaults(handler=run)
