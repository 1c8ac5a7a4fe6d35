"""cycles: luck pillars and flowing years/months/days with their natal interactions."""

import argparse

from bazi.cycles import cycle_engine, cycles_to_dict
from commands.common import add_birth_arguments, add_json_flag, chart_from_args, emit
from config import GlobalConfig


def _text(data) -> str:
    lines = [f"direction: {data['direction']}"]
    for lp in data["luck_pillars"]:
        lines.append(f"luck {lp['ordinal']}: {lp['pillar']} from {lp['start_civil_year']} (age {lp['start_age_years']:.2f})")
    for f in data["flowing"]:
        hits = "; ".join(f"{i['kind']} {i['natal_position']} {i['natal']}/{i['flowing']}" for i in f.get("interactions", []))
        lines.append(f"{f['granularity'].lower()} {f['period_start']}: {f['pillar']}" + (f"  [{hits}]" if hits else ""))
    return "\n".join(lines)


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    chart = chart_from_args(args, config)
    start = args.from_year if args.from_year is not None else chart.civil.year + config.reference_age
    end = args.to_year if args.to_year is not None else start
    report = cycle_engine.cycles_report(
        chart, start, end,
        count=args.count or config.luck_pillar_count,
        include_months=args.months or config.include_flowing_month,
        include_days=args.days or config.include_flowing_day,
    )
    data = cycles_to_dict(report, chart, config.three_harmony)
    emit(data, args.json, _text(data))
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("cycles", help="luck and flowing pillars", description=__doc__)
    add_birth_arguments(parser)
    parser.add_argument("--from-year", type=int, help="first flowing year (default: birth year + reference age)")
    parser.add_argument("--to-year", type=int, help="last flowing year (default: --from-year)")
    parser.add_argument("--count", type=int, help="number of luck pillars")
    parser.add_argument("--months", action="store_true", help="include flowing months")
    parser.add_argument("--days", action="store_true", help="include flowing days")
    add_json_flag(parser)
    parser.set_defaults(handler=run)
