import json

import pytest

from cli import EXIT_USAGE, dispatch

HONG_KONG = ["--birth", "1966-10-18T23:15", "--utc-offset", "480", "--lon", "114.17", "--lat", "22.3", "--gender", "f"]


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    for key in ("BAZI_LATE_ZI_POLICY", "BAZI_SOLAR_TIME", "BAZI_CACHE_DIR", "BAZI_LOG_LEVEL"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_chart_json(capsys):
    assert dispatch(["chart", *HONG_KONG, "--json"]) == 0
    data = _json_out(capsys)
    assert " ".join(data["pillars"][p]["glyphs"] for p in ("year", "month", "day", "hour")) == "丙午 戊戌 辛亥 戊子"


def test_global_flags_reach_the_chart(capsys):
    assert dispatch(["--late-zi", "same_day", "chart", *HONG_KONG, "--json"]) == 0
    data = _json_out(capsys)
    assert data["pillars"]["day"]["glyphs"] == "庚戌"
    assert data["config"]["late_zi_policy"] == "same_day"


def test_analyze_synthetic_pillars(capsys):
    assert dispatch(["analyze", "--pillars", "庚戌 辛酉 甲午 庚午", "--json"]) == 0
    assert _json_out(capsys)["pattern"]["name"] == "从杀格"


def test_solar_terms(capsys):
    assert dispatch(["solar-terms", "2024", "--json"]) == 0
    assert len(_json_out(capsys)["terms"]) == 24


def test_solar_terms_text_is_one_utc_instant_per_line(capsys):
    assert dispatch(["solar-terms", "2024"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 24
    assert all(line.endswith("Z") for line in lines)
    assert lines[0].startswith("2024-02-04T08:2")
    assert lines[-1].startswith("2025-01-")


def test_solar_terms_year_is_positional(capsys):
    assert dispatch(["solar-terms", "--year", "2024"]) == EXIT_USAGE


def test_validate(capsys, sample_dataset_path):
    assert dispatch(["validate", "--dataset", sample_dataset_path]) == 0
    out = capsys.readouterr().out
    assert "persons: 2" in out
    assert "questions: 5" in out


def test_usage_errors_exit_2(capsys):
    assert dispatch(["horoscope"]) == EXIT_USAGE
    assert dispatch(["chart", "--json"]) == EXIT_USAGE
    assert "usage:" in capsys.readouterr().err


def test_bad_input_reports_the_field(capsys):
    code = dispatch(["chart", "--birth", "1966-13-01T10:00", "--utc-offset", "0", "--lon", "0", "--gender", "f"])
    assert code == 1
    assert capsys.readouterr().err.startswith("error: --birth")


def test_missing_dataset_is_an_error(capsys, tmp_path):
    assert dispatch(["validate", "--dataset", str(tmp_path / "none.json")]) == 1
    assert "dataset not found" in capsys.readouterr().err


def test_cycles_months_in_2100(capsys):
    assert dispatch(["cycles", *HONG_KONG, "--from-year", "2100", "--months", "--json"]) == 0
    flowing = _json_out(capsys)["flowing"]
    assert len(flowing) == 13
    assert flowing[-1]["pillar"] == "己丑"


def test_eval_with_gold_mock_then_runs(capsys, sample_dataset_path, tmp_path):
    db = str(tmp_path / "results.db")
    report_path = tmp_path / "report.md"
    code = dispatch([
        "eval", "--dataset", sample_dataset_path, "--provider", "mock-gold", "--shuffle-seed", "1",
        "--cache-dir", str(tmp_path / "cache"), "--report", str(report_path), "--results-db", db,
    ])
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("| Setting | Model | Acc. (%) |")
    assert "| Full Model + Shuffled Birthday | mock-gold | 100.0 (↑0.0%) |" in captured.out
    assert report_path.read_text(encoding="utf-8") == captured.out
    assert "stored run" in captured.err

    assert dispatch(["runs", "--results-db", db, "--json"]) == 0
    runs = _json_out(capsys)["runs"]
    assert len(runs) == 1 and runs[0]["outcomes"] == 30

    assert dispatch(["runs", "--results-db", db, "--run-id", runs[0]["run_id"], "--format", "csv"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 7


def test_eval_live_provider_needs_a_model(capsys, sample_dataset_path):
    assert dispatch(["eval", "--dataset", sample_dataset_path, "--no-cache"]) == 1
    assert "--model" in capsys.readouterr().err
