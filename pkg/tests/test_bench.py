import asyncio
import copy
import json
from types import SimpleNamespace

import openai
import httpx
import pytest

from bench.dataset import (
    dataset_to_dict,
    import_raw,
    load_dataset,
    parse_dataset,
    parse_raw_birth_time,
    proper_name_candidates,
)
from bench.metrics import accuracy_pct, binomial_interval, relative_change, round1
from bench.report import EvalReport, EvalSetting, ReportCell, SETTING_ORDER, format_change, render_report
from bench.runner import STATUS_TRANSPORT_ERROR, BenchmarkRunner, ModelSpec, run_eval
from bench.shuffle import ShuffleMode, birth_inputs, make_shuffle
from errors import ConfigurationError, DatasetError, DerangementError, UndefinedBaselineError
from llm.client import ChatClient, ProviderConfig, ProviderKind
from tests.conftest import synthetic_dataset


def _spec(kind, model_id=None, **kwargs):
    provider = ProviderConfig(kind, retry_count=0, retry_backoff=(0.0,), **kwargs)
    return ModelSpec(model_id or kind.value, provider)


# ==================== Dataset ====================

def test_sample_dataset_counts(sample_dataset_path):
    records, report = load_dataset(sample_dataset_path)
    assert [r.person_id for r in records] == ["P001", "P002"]
    assert (report.persons, report.countries, report.questions) == (2, 2, 5)
    assert (report.male, report.female) == (1, 1)
    assert report.warnings == []
    assert report.per_country["China"] == {"persons": 1, "questions": 2}
    assert report.per_dimension["Health"] == 1
    assert records[0].questions[1].period_year == 1994
    assert records[1].questions[2].choices[1] == "Close and supportive"


def test_synthetic_dataset_matches_published_shape():
    records, report = parse_dataset(synthetic_dataset())
    assert (report.persons, report.questions, report.countries) == (50, 488, 29)
    assert (report.male, report.female) == (37, 13)
    assert report.avg_questions_per_person == pytest.approx(9.76)


def test_schema_violations_name_the_record(sample_dataset_path):
    with open(sample_dataset_path, encoding="utf-8") as f:
        data = json.load(f)
    broken = copy.deepcopy(data)
    broken["persons"][0]["questions"] = []
    broken["persons"][1]["questions"][2]["gold_index"] = 3
    with pytest.raises(DatasetError) as info:
        parse_dataset(broken)
    issues = info.value.issues
    assert any(issue.startswith("persons.0.questions") for issue in issues)
    assert any(issue.startswith("persons.1.questions.2") and "gold_index" in issue for issue in issues)

    duplicate = copy.deepcopy(data)
    duplicate["persons"][1]["person_id"] = "P001"
    with pytest.raises(DatasetError):
        parse_dataset(duplicate)

    out_of_window = copy.deepcopy(data)
    out_of_window["persons"][0]["birth"]["iso_local"] = "1899-05-01T10:00"
    with pytest.raises(DatasetError):
        parse_dataset(out_of_window)


def test_dataset_round_trips_through_its_dict(sample_dataset_path):
    records, _ = load_dataset(sample_dataset_path)
    again, _ = parse_dataset(dataset_to_dict(records))
    assert again == records


def test_proper_names_are_flagged():
    assert proper_name_candidates("Did this person work with Steven Spielberg?") == ["Steven Spielberg"]
    assert proper_name_candidates("What kind of job is this person likely to have?") == []


# ==================== Raw import ====================

PLACES = {"Hong Kong": {"lon": 114.17, "lat": 22.3, "utc_offset_minutes": 480}}


def _raw_person(**overrides):
    person = {
        "name": "Some Famous Person",
        "birth_time": "1966/10/18, 11:15 PM",
        "birthplace": "Hong Kong",
        "gender": "female",
        "country": "China",
        "questions": [{
            "question": "What kind of job is this person likely to have?",
            "options": ["A. Lawyer", "B. Salesperson", "C. Real estate business", "D. Library clerk"],
            "answer": "C",
            "dimension": "Career",
        }],
    }
    person.update(overrides)
    return person


def test_raw_birth_time():
    parsed = parse_raw_birth_time("1966/10/18, 11:15 PM")
    assert (parsed.year, parsed.month, parsed.day, parsed.hour, parsed.minute) == (1966, 10, 18, 23, 15)
    with pytest.raises(ValueError):
        parse_raw_birth_time("18 Oct 1966")


def test_import_raw_drops_names_and_numbers_people():
    converted = import_raw([_raw_person(), _raw_person(gender="m")], PLACES)
    first = converted["persons"][0]
    assert [p["person_id"] for p in converted["persons"]] == ["P001", "P002"]
    assert "name" not in first
    assert "Some Famous Person" not in json.dumps(converted)
    assert first["birth"] == {"iso_local": "1966-10-18T23:15", "utc_offset_minutes": 480}
    question = first["questions"][0]
    assert question["question_id"] == "P001-Q01"
    assert question["choices"] == ["Lawyer", "Salesperson", "Real estate business", "Library clerk"]
    assert question["gold_index"] == 2


def test_import_raw_collects_every_problem():
    bad_answer = _raw_person()
    bad_answer["questions"][0]["answer"] = "F"
    with pytest.raises(DatasetError) as info:
        import_raw([_raw_person(birthplace="Atlantis"), bad_answer], PLACES)
    assert len(info.value.issues) == 2
    assert info.value.issues[0].startswith("persons.0.birthplace")
    assert info.value.issues[1].startswith("persons.1.questions.0.answer")


# ==================== Shuffle ====================

@pytest.mark.parametrize("n", [2, 3, 10, 50])
def test_shuffle_is_always_a_derangement(n):
    records = [SimpleNamespace(person_id=f"P{i:03d}") for i in range(n)]
    for seed in range(1000):
        plan = make_shuffle(records, seed)
        assert plan.fixed_points() == 0
        assert sorted(plan.permutation.values()) == sorted(plan.permutation)


def test_shuffle_is_seeded():
    records = [SimpleNamespace(person_id=f"P{i:03d}") for i in range(20)]
    assert make_shuffle(records, 5).permutation == make_shuffle(list(reversed(records)), 5).permutation
    assert make_shuffle(records, 5).permutation != make_shuffle(records, 6).permutation
    with pytest.raises(DerangementError):
        make_shuffle(records[:1], 0)


def test_birth_inputs_modes(sample_dataset_path):
    (hk, oxford), _ = load_dataset(sample_dataset_path)
    birth, place = birth_inputs(hk, oxford, ShuffleMode.BIRTH_AND_PLACE)
    assert birth == oxford.birth and place == oxford.place

    birth, place = birth_inputs(hk, oxford, ShuffleMode.DATE_ONLY)
    assert (birth.year, birth.month, birth.day) == (1942, 1, 8)
    assert (birth.hour, birth.minute, birth.utc_offset_minutes) == (23, 15, 480)
    assert place == hk.place


# ==================== Metrics ====================

def test_relative_change_uses_printed_accuracies():
    assert relative_change(51.2, 39.3) == 30.3
    assert relative_change(42.5, 39.3) == 8.1
    assert relative_change(30.0, 55.25) == -45.7
    assert relative_change(39.3, 39.3) == 0.0
    with pytest.raises(UndefinedBaselineError):
        relative_change(10.0, 0.0)


def test_rounding_and_accuracy():
    assert round1(2.25) == 2.3
    assert round1(-2.25) == -2.3
    assert round1(-0.04) == 0.0
    assert accuracy_pct(122, 488) == 25.0
    assert accuracy_pct(0, 0) == 0.0


def test_binomial_interval_for_a_guesser():
    low, high = binomial_interval(488)
    assert low == pytest.approx(19.9, abs=0.3)
    assert high == pytest.approx(30.1, abs=0.3)


# ==================== Report ====================

def _cell(model_id, setting, shuffled, correct, n=100):
    return ReportCell(model_id, setting, shuffled, n, correct, per_dimension={"Career": {"n": n, "correct": correct}})


def _table_report():
    cells = []
    for model_id, accs in (("model-a", (39, 51, 42)), ("model-b", (30, 35, 36))):
        for setting, correct in zip(SETTING_ORDER, accs):
            cells.append(_cell(model_id, setting, False, correct))
    cells.append(_cell("model-a", EvalSetting.FULL_MODEL, True, 28))
    cells.append(_cell("model-b", EvalSetting.FULL_MODEL, True, 25))
    cells.append(_cell("model-c", EvalSetting.VANILLA_BAZI, False, 0))
    report = EvalReport(cells)
    report.sort_cells()
    report.apply_baselines()
    return report


def test_baselines_and_arrows():
    report = _table_report()
    full = report.cell("model-a", EvalSetting.FULL_MODEL)
    assert full.relative_change == relative_change(42.0, 39.0)
    assert full.baseline == "model-a/vanilla"
    shuffled = report.cell("model-a", EvalSetting.FULL_MODEL, shuffled=True)
    assert shuffled.baseline == "model-a/full"
    assert shuffled.relative_change == relative_change(28.0, 42.0)
    assert report.cell("model-a", EvalSetting.VANILLA_BAZI).relative_change is None
    assert format_change(30.3) == " (↑30.3%)"
    assert format_change(-45.7) == " (↓45.7%)"
    assert format_change(None) == ""


def test_markdown_has_one_row_per_cell():
    report = _table_report()
    text = render_report(report, "markdown")
    table = text.split("\n\n")[0].splitlines()
    assert table[0] == "| Setting | Model | Acc. (%) |"
    rows = table[2:]
    assert len(rows) == 9
    assert rows[0].startswith("| Vanilla LLM w/ BaZi (Baseline) | model-a | 39.0 |")
    assert rows[1].startswith("|  | model-b |")
    assert "Full Model + Shuffled Birthday" in text
    assert "(↓33.3%)" in text


def test_json_and_csv_rendering():
    report = _table_report()
    again = EvalReport.from_json(render_report(report, "json"))
    assert [c.to_dict() for c in again.cells] == [c.to_dict() for c in report.cells]
    csv_text = render_report(report, "csv")
    assert csv_text.splitlines()[0].startswith("model_id,setting,shuffled")
    assert len(csv_text.splitlines()) == 10
    with pytest.raises(ConfigurationError):
        render_report(report, "xml")
    with pytest.raises(ConfigurationError):
        EvalReport.from_dict({"format": "other", "cells": []})


# ==================== End to end ====================

@pytest.fixture(scope="module")
def synthetic_records():
    records, _ = parse_dataset(synthetic_dataset())
    return records


def _run(config, records, settings, spec, shuffle=None, cache=None):
    runner = BenchmarkRunner(config, cache)
    report = asyncio.run(runner.run(records, settings, [spec], shuffle))
    return runner, report


def test_gold_mock_scores_everything(config, synthetic_records):
    plan = make_shuffle(synthetic_records, 11)
    _, report = _run(config, synthetic_records, list(SETTING_ORDER), _spec(ProviderKind.MOCK_GOLD), plan)
    assert len(report.cells) == 6
    for cell in report.cells:
        assert cell.n_questions == 488
        assert cell.accuracy == 100.0
        assert cell.extraction_failures == 0
    assert report.cell("mock-gold", EvalSetting.FULL_MODEL, shuffled=True).relative_change == 0.0
    assert report.valid
    assert report.metadata["shuffle"]["mode"] == "birth_and_place"


def test_uniform_mock_stays_at_chance(config, synthetic_records):
    _, report = _run(config, synthetic_records, [EvalSetting.VANILLA_BAZI], _spec(ProviderKind.MOCK_UNIFORM, seed=1))
    low, high = binomial_interval(488)
    assert low <= report.cells[0].accuracy <= high


def test_reports_are_reproducible(config, synthetic_records):
    spec = _spec(ProviderKind.MOCK_UNIFORM, seed=4)
    _, first = _run(config, synthetic_records, [EvalSetting.VANILLA_BAZI], spec)
    _, second = _run(config, list(reversed(synthetic_records)), [EvalSetting.VANILLA_BAZI], spec)
    assert render_report(first, "json") == render_report(second, "json")


def test_cached_rerun_matches(config, sample_dataset_path, tmp_path):
    from llm.cache import ResponseCache

    records, _ = load_dataset(sample_dataset_path)
    spec = _spec(ProviderKind.MOCK_ECHO)
    cache = ResponseCache(str(tmp_path / "cache"))
    _, first = _run(config, records, [EvalSetting.FULL_MODEL], spec, cache=cache)
    misses = cache.misses
    _, second = _run(config, records, [EvalSetting.FULL_MODEL], spec, cache=cache)
    assert cache.misses == misses
    assert cache.hits >= 5
    assert render_report(first, "json") == render_report(second, "json")


def test_shuffled_prompts_carry_the_donor_chart(config, sample_dataset_path):
    records, _ = load_dataset(sample_dataset_path)
    plan = make_shuffle(records, 0)
    runner, _ = _run(config, records, [EvalSetting.VANILLA_BAZI], _spec(ProviderKind.MOCK_ECHO), plan)
    real = {(o.person_id, o.question_id): o.prompt_hash for o in runner.outcomes if not o.shuffled}
    swapped = {(o.person_id, o.question_id): o.prompt_hash for o in runner.outcomes if o.shuffled}
    assert real.keys() == swapped.keys()
    assert all(real[k] != swapped[k] for k in real)


def test_prompts_never_leak_identity_or_answers(config, sample_dataset_path):
    records, _ = load_dataset(sample_dataset_path)
    runner = BenchmarkRunner(config)
    by_id = {r.person_id: r for r in records}
    for record in records:
        view = runner.subject_view(record, by_id, None)
        for question in record.questions:
            window = runner.persona.window_for(view.chart, question.period_year, config.reference_age)
            cycles = runner.cycles_for(record.person_id, False, view, window)
            prompts = [runner.question_prompt(view, cycles, question, window, s, "notes") for s in SETTING_ORDER]
            prompts.append(runner.knowledge_prompt(view, cycles, question, window))
            for text in prompts:
                for secret in (record.person_id, record.place.name, record.country, "gold"):
                    assert secret not in text
                assert "correct answer" not in text.lower()


def test_run_eval_runs_real_and_shuffled(config, sample_dataset_path):
    records, _ = load_dataset(sample_dataset_path)
    report = asyncio.run(run_eval(records, EvalSetting.BAZI_RULE_KNOWLEDGE, [_spec(ProviderKind.MOCK_FIXED, letter="C")],
                                  make_shuffle(records, 3), config))
    assert [c.shuffled for c in report.cells] == [False, True]
    # gold letters in the sample: C, C, A, C, B
    assert report.cells[0].correct == 3


def test_transport_failures_invalidate_the_run(config, sample_dataset_path, monkeypatch):
    async def unreachable(self, request):
        raise openai.APIConnectionError(request=httpx.Request("POST", "https://llm.invalid"))

    monkeypatch.setattr(ChatClient, "_send", unreachable)
    records, _ = load_dataset(sample_dataset_path)
    runner, report = _run(config, records, [EvalSetting.VANILLA_BAZI], _spec(ProviderKind.MOCK_FIXED))
    assert not report.valid
    assert report.cells[0].transport_errors == 5
    assert all(o.status == STATUS_TRANSPORT_ERROR for o in runner.outcomes)
    assert "Run flagged invalid" in render_report(report, "markdown")
