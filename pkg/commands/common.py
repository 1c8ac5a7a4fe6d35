"""Argument helpers shared by the subcommands."""

import argparse
import json
import sys
from datetime import datetime
from typing import Any, Optional, Tuple

from bazi.calendrics import CivilDateTime, GeoLocation, check_civil_window
from bazi.chart import FourPillarsChart, Gender, chart_builder
from config import GlobalConfig
from errors import InputValidationError


def add_json_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--json", action="store_true", help="print a machine-readable JSON document")


def add_birth_arguments(parser: argparse.ArgumentParser, required: bool = True) -> None:
    group = parser.add_argument_group("birth data")
    group.add_argument("--birth", required=required, help="local birth time, YYYY-MM-DDTHH:MM")
    group.add_argument("--utc-offset", type=int, default=None, help="UTC offset in minutes, e.g. 480")
    group.add_argument("--lon", type=float, default=None, help="birthplace longitude, degrees east")
    group.add_argument("--lat", type=float, default=0.0, help="birthplace latitude, degrees north")
    group.add_argument("--gender", default=None, help="m or f")


def add_pillars_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pillars", help='synthetic chart instead of birth data, e.g. "丙午 戊戌 辛亥 戊子"')


def parse_birth(text: str, utc_offset: Optional[int]) -> CivilDateTime:
    try:
        local = datetime.fromisoformat(text)
    except ValueError:
        raise InputValidationError(f"expected YYYY-MM-DDTHH:MM, got {text!r}", field="--birth") from None
    civil = CivilDateTime.from_datetime(local, utc_offset if utc_offset is not None else 0)
    check_civil_window(civil)
    return civil


def birth_from_args(args: argparse.Namespace) -> Tuple[CivilDateTime, GeoLocation, Gender]:
    missing = [flag for flag, value in (("--utc-offset", args.utc_offset), ("--lon", args.lon), ("--gender", args.gender))
               if value is None]
    if missing:
        raise InputValidationError(f"birth data needs {', '.join(missing)}", field="birth")
    return parse_birth(args.birth, args.utc_offset), GeoLocation(args.lon, args.lat), Gender.parse(args.gender)


def chart_from_args(args: argparse.Namespace, config: GlobalConfig) -> FourPillarsChart:
    """Chart from --pillars when given, otherwise from the birth data flags."""
    pillars = getattr(args, "pillars", None)
    if pillars:
        gender = Gender.parse(args.gender) if args.gender else Gender.FEMALE
        return FourPillarsChart.from_pillars(pillars, gender)
    if not args.birth:
        raise InputValidationError("give --birth with its location flags, or --pillars", field="--birth")
    civil, loc, gender = birth_from_args(args)
    return chart_builder.build_chart_from_config(civil, loc, gender, config)


def emit(payload: Any, as_json: bool, text: Optional[str] = None) -> None:
    if as_json or text is None:
        sys.stdout.write(json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
