"""persona: render the persona prompt for a birth, optionally with a question attached."""

import argparse

from bazi.analysis import Analyzer
from bazi.cycles import cycle_engine
from bazi.persona import DOMAIN_ORDER, SECTION_KEYS, PersonaBuilder, QuestionContext, ScenarioDomain
from commands.common import add_birth_arguments, add_json_flag, chart_from_args, emit
from config import GlobalConfig
from errors import InputValidationError


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    chart = chart_from_args(args, config)
    builder = PersonaBuilder.from_config(config)
    bundle = Analyzer.from_config(config).analyze(chart)
    window = builder.window_for(chart, args.period_year, config.reference_age)
    cycles = cycle_engine.cycles_report(
        chart, window.start_year, window.end_year,
        count=config.luck_pillar_count,
        include_months=config.include_flowing_month,
        include_days=config.include_flowing_day,
    )
    domains = [ScenarioDomain.parse(d) for d in args.domain] if args.domain else list(DOMAIN_ORDER)

    context = None
    if args.question:
        if len(args.choice) < 2:
            raise InputValidationError("a question needs at least two --choice values", field="--choice")
        context = QuestionContext(args.question, tuple(args.choice))

    prompt = builder.render_prompt(
        chart, bundle, cycles, domains, context,
        template_version=config.template_version, window=window,
        include=tuple(args.section) if args.section else SECTION_KEYS,
    )
    emit(prompt.to_dict(), args.json, prompt.rendered_text)
    return 0


def setup(subparsers) -> None:
    parser = subparsers.add_parser("persona", help="render a persona prompt", description=__doc__)
    add_birth_arguments(parser)
    parser.add_argument("--domain", action="append", default=[],
                        help="scenario domain (repeatable): wealth, health, kinship, career, relationship")
    parser.add_argument("--period-year", type=int, help="year the reading is about (default: birth year + reference age)")
    parser.add_argument("--section", action="append", choices=SECTION_KEYS, help="restrict to these sections")
    parser.add_argument("--question", help="question text to append")
    parser.add_argument("--choice", action="append", default=[], help="answer choice (repeatable, in order)")
    add_json_flag(parser)
    parser.set_defaults(handler=run)
