"""eval: run the benchmark over one or more settings and models."""

import argparse
import sys
from pathlib import Path

import structlog

from bench.dataset import load_dataset
from bench.report import EvalSetting, format_for_path, plot_report, render_report
from bench.runner import BenchmarkRunner, ModelSpec
from bench.shuffle import make_shuffle
from commands.common import emit
from config import SHUFFLE_MODES, GlobalConfig
from db.database import ResultStore
from errors import InputValidationError
from llm.cache import ResponseCache
from llm.client import ProviderConfig

logger = structlog.get_logger(__name__)

SETTING_CHOICES = [s.value for s in EvalSetting] + ["all"]


def _settings(values) -> list:
    if not values or "all" in values:
        return list(EvalSetting)
    seen = []
    for value in values:
        setting = EvalSetting(value)
        if setting not in seen:
            seen.append(setting)
    return seen


async def run(args: argparse.Namespace, config: GlobalConfig) -> int:
    records, _ = load_dataset(args.dataset)
    provider = ProviderConfig.parse(args.provider, config)
    knowledge_provider = ProviderConfig.parse(args.knowledge_provider, config) if args.knowledge_provider else None
    model_ids = args.model or ([provider.kind.value] if provider.is_mock else [])
    if not model_ids:
        raise InputValidationError("eval against a live provider needs at least one --model", field="--model")
    models = [ModelSpec(model_id, provider, args.knowledge_model, knowledge_provider) for model_id in model_ids]
    shuffle = make_shuffle(records, args.shuffle_seed) if args.shuffle_seed is not None else None
    cache = None if args.no_cache else ResponseCache(config.cache_dir)

    runner = BenchmarkRunner(config, cache)
    report = await runner.run(records, _settings(args.setting), models, shuffle,
                              include_unshuffled=not args.shuffle_only)
    if cache is not None:
        logger.info("cache_stats", **cache.stats())

    fmt = "json" if args.json else args.format
    if args.report:
        report_fmt = format_for_path(args.report)
        Path(args.report).write_text(render_report(report, report_fmt), encoding="utf-8")
        logger.info("report_written", path=args.report, format=report_fmt)
    if args.plot:
        plot_report(report, args.plot)
    if args.results_db:
        async with ResultStore(args.results_db) as store:
            run_id = await store.save_run(report, runner.outcomes)
        sys.stderr.write(f"stored run {run_id} in {args.results_db}\n")

    if args.json:
        emit(report.to_dict(), True)
    else:
        sys.stdout.write(render_report(report, fmt))
    return 0 if report.valid else 1


def setup(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="run the benchmark", description=__doc__)
    parser.add_argument("--dataset", required=True, help="dataset JSON file")
    parser.add_argument("--setting", action="append", choices=SETTING_CHOICES,
                        help="vanilla, rules, full or all (repeatable; default all)")
    parser.add_argument("--model", action="append", help="model id (repeatable)")
    parser.add_argument("--provider", default="openai",
                        help="openai, mock-gold, mock-uniform:SEED, mock-fixed:LETTER or mock-echo")
    parser.add_argument("--knowledge-model", help="model id for the full model's knowledge stage")
    parser.add_argument("--knowledge-provider", help="provider for the knowledge stage (default: --provider)")
    parser.add_argument("--shuffle-seed", type=int, help="also run the shuffled-birthday control with this seed")
    parser.add_argument("--shuffle-only", action="store_true", help="skip the real-birthday cells")
    parser.add_argument("--shuffle-mode", dest="shuffle_mode", choices=SHUFFLE_MODES)
    parser.add_argument("--cache-dir", dest="cache_dir", help="response cache directory")
    parser.add_argument("--no-cache", action="store_true", help="always call the provider")
    parser.add_argument("--max-parallel", dest="llm_max_parallel", type=int, help="concurrent requests per provider")
    parser.add_argument("--temperature", dest="llm_temperature", type=float)
    parser.add_argument("--report", help="write the report to out.json, out.csv or out.md")
    parser.add_argument("--format", choices=["markdown", "csv", "json"], default="markdown",
                        help="stdout format (default markdown)")
    parser.add_argument("--plot", help="write an accuracy bar chart PNG")
    parser.add_argument("--results-db", help="store the run in this SQLite file")
    parser.add_argument("--json", action="store_true", help="print the JSON report")
    parser.set_defaults(handler=run)
