"""validate: schema check and counting statistics for a dataset file."""

import argparse

from bench.dataset import load_dataset
from commands.common import add_json_flag, emit
from config import GlobalConfig


def _text(report) -> str:
    lines = [
        f"persons: {report.persons}",
        f"countries: {report.countries}",
        f"questions: {report.questions} (avg {report.avg_questions_per_person:.2f} per person)",
        f"gender: {report.male} male / {report.female} female",
        "per dimension: " + ", ".join(f"{k} {v}" for k, v in report.per_dimension.items()),
    ]
    for country, stats in report.per_country.items():
        lines.append(f"  {country}: {stats['persons']} persons, {stats['questions']} questions")
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines)


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    _, report = load_dataset(args.dataset)
    emit(report.to_dict(), args.json, _text(report))
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("validate", help="validate a benchmark dataset", description=__doc__)
    parser.add_argument("--dataset", required=True, help="dataset JSON file")
    add_json_flag(parser)
    parser.set_defaults(handler=run)
