"""import: convert the raw release format plus a places table into the dataset schema."""

import argparse
import json
from pathlib import Path

import structlog

from bench.dataset import import_raw
from commands.common import add_json_flag, emit
from config import GlobalConfig
from errors import DatasetError

logger = structlog.get_logger(__name__)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path} is not valid JSON", [f"line {e.lineno} column {e.colno}: {e.msg}"]) from None


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    converted = import_raw(_read_json(args.raw), _read_json(args.places))
    Path(args.out).write_text(json.dumps(converted, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    persons = len(converted["persons"])
    questions = sum(len(p["questions"]) for p in converted["persons"])
    logger.info("dataset_imported", out=args.out, persons=persons, questions=questions)
    emit({"out": args.out, "persons": persons, "questions": questions}, args.json,
         f"wrote {args.out}: {persons} persons, {questions} questions")
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("import", help="import the raw release format", description=__doc__)
    parser.add_argument("--raw", required=True, help="raw dataset JSON")
    parser.add_argument("--places", required=True, help="JSON table: place name -> {lon, lat, utc_offset_minutes}")
    parser.add_argument("--out", required=True, help="output dataset file")
    add_json_flag(parser)
    parser.set_defaults(handler=run)
