"""analyze: Ten Gods, ShenSha, strength, pattern and favorable elements."""

import argparse

from bazi.analysis import Analyzer, bundle_to_dict
from commands.common import add_birth_arguments, add_json_flag, add_pillars_argument, chart_from_args, emit
from config import GlobalConfig


def _text(data) -> str:
    s, p, e = data["strength"], data["pattern"], data["elements"]
    lines = [
        f"chart: {data['chart']}",
        "stem gods: " + ", ".join(f"{k} {v}" for k, v in data["ten_gods"]["stems"].items()),
        "branch gods: " + ", ".join(f"{k} {v}" for k, v in data["ten_gods"]["branches"].items()),
        "shensha: " + (", ".join(f"{m['name']}@{m['location']}" for m in data["shensha"]) or "none"),
        f"strength: {s['category']} ({s['score']:+.2f})",
        f"pattern: {p['name']} ({p['english']}, {p['kind']})",
        f"favorable: {', '.join(e['favorable']) or 'none'}; unfavorable: {', '.join(e['unfavorable']) or 'none'}",
    ]
    return "\n".join(lines)


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    chart = chart_from_args(args, config)
    bundle = Analyzer.from_config(config).analyze(chart)
    data = bundle_to_dict(bundle)
    emit(data, args.json, _text(data))
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("analyze", help="interpret a chart", description=__doc__)
    add_birth_arguments(parser, required=False)
    add_pillars_argument(parser)
    add_json_flag(parser)
    parser.set_defaults(handler=run)
