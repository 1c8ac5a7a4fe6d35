import asyncio

import pytest

from bench.dataset import load_dataset
from bench.report import EvalSetting
from bench.runner import BenchmarkRunner, ModelSpec
from db.database import ResultStore
from errors import ConfigurationError
from llm.client import ProviderConfig, ProviderKind


@pytest.fixture
def finished_run(config, sample_dataset_path):
    records, _ = load_dataset(sample_dataset_path)
    runner = BenchmarkRunner(config)
    spec = ModelSpec("mock-fixed", ProviderConfig(ProviderKind.MOCK_FIXED, letter="C"))
    report = asyncio.run(runner.run(records, [EvalSetting.VANILLA_BAZI], [spec]))
    return report, runner.outcomes


def test_store_and_reload_a_run(tmp_path, finished_run):
    report, outcomes = finished_run

    async def scenario():
        async with ResultStore(str(tmp_path / "results.db")) as store:
            run_id = await store.save_run(report, outcomes)
            return run_id, await store.get_report(run_id), await store.list_runs(), await store.get_outcomes(run_id)

    run_id, loaded, runs, rows = asyncio.run(scenario())
    assert loaded.to_dict() == report.to_dict()
    assert runs == [{"run_id": run_id, "created_at": runs[0]["created_at"], "valid": True, "outcomes": 5}]
    assert [r["question_id"] for r in rows] == ["P001-Q01", "P001-Q02", "P002-Q01", "P002-Q02", "P002-Q03"]
    assert sum(r["correct"] for r in rows) == 3
    assert all(isinstance(r["shuffled"], bool) for r in rows)


def test_unknown_run_id(tmp_path):
    async def scenario():
        async with ResultStore(str(tmp_path / "results.db")) as store:
            await store.get_report("missing")

    with pytest.raises(ConfigurationError):
        asyncio.run(scenario())


def test_store_requires_connect(tmp_path):
    store = ResultStore(str(tmp_path / "results.db"))
    with pytest.raises(RuntimeError):
        store.conn
