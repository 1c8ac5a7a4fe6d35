"""chart: the four pillars for a birth."""

import argparse

from bazi.chart import POSITIONS, chart_to_dict
from commands.common import add_birth_arguments, add_json_flag, chart_from_args, emit
from config import GlobalConfig


def _text(data) -> str:
    lines = ["  ".join(f"{pos}: {data['pillars'][pos]['glyphs']}" for pos in POSITIONS)]
    dm = data["day_master"]
    lines.append(f"day master: {dm['glyph']} ({dm['pinyin']}, {dm['polarity']} {dm['element']})")
    if "birth" in data:
        lines.append(f"local true solar time: {data['birth']['local_true_solar']}")
    lines.append(f"late zi: {data['config']['late_zi_policy']} (applied: {data['late_zi_applied']}), "
                 f"solar time: {data['config']['solar_time']}")
    return "\n".join(lines)


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    chart = chart_from_args(args, config)
    data = chart_to_dict(chart)
    emit(data, args.json, _text(data))
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("chart", help="build a Four Pillars chart", description=__doc__)
    add_birth_arguments(parser)
    add_json_flag(parser)
    parser.set_defaults(handler=run)
