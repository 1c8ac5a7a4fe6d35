import pytest

from bazi.chart import STEMS, FourPillarsChart, Gender, Pillar
from bazi.cycles import Direction, Granularity, cycle_engine, cycles_to_dict
from errors import InputValidationError


@pytest.mark.parametrize("stem,gender,direction", [
    (0, Gender.MALE, Direction.FORWARD),     # yang stem, male
    (0, Gender.FEMALE, Direction.BACKWARD),
    (1, Gender.MALE, Direction.BACKWARD),
    (1, Gender.FEMALE, Direction.FORWARD),   # yin stem, female
])
def test_luck_direction(stem, gender, direction):
    assert cycle_engine.luck_direction(STEMS[stem], gender) is direction


def test_sample_luck_pillars_step_backward(hong_kong_chart):
    pillars = cycle_engine.luck_pillars(hong_kong_chart, hong_kong_chart.birth, count=8)
    assert [lp.pillar.glyphs for lp in pillars[:3]] == ["丁酉", "丙申", "乙未"]
    assert [lp.ordinal for lp in pillars] == list(range(1, 9))
    assert 0.0 <= pillars[0].start_age_years < 10.0
    for earlier, later in zip(pillars, pillars[1:]):
        assert later.start_age_years - earlier.start_age_years == pytest.approx(10.0)
    assert pillars[0].start_civil_year >= 1966


def test_start_age_counts_whole_days_in_thirds(hong_kong_chart):
    age = cycle_engine.start_age(hong_kong_chart.birth, Direction.BACKWARD)
    assert (age * 3) == pytest.approx(round(age * 3))


def test_luck_pillar_count_is_bounded(hong_kong_chart):
    for count in (0, 13):
        with pytest.raises(InputValidationError):
            cycle_engine.luck_pillars(hong_kong_chart, hong_kong_chart.birth, count=count)


def test_flowing_year_and_months(hong_kong_chart):
    report = cycle_engine.cycles_report(hong_kong_chart, 2024, 2025, count=4, include_months=True)
    years = [f for f in report.flowing if f.granularity is Granularity.YEAR]
    months = [f for f in report.flowing if f.granularity is Granularity.MONTH]
    assert [f.pillar.glyphs for f in years] == ["甲辰", "乙巳"]
    assert years[0].period_start.isoformat().startswith("2024-02-04")
    assert len(months) == 24
    assert months[0].pillar.glyphs == "丙寅"
    assert report.direction is Direction.BACKWARD
    assert len(report.luck_pillars) == 4


def test_flowing_days_follow_the_day_cycle(hong_kong_chart):
    days = cycle_engine.flowing_days(hong_kong_chart.civil, 3, hong_kong_chart.location)
    indices = [d.pillar.sexagenary_index for d in days]
    assert indices == [46, 47, 48]


def test_interactions_with_natal_chart(hong_kong_chart):
    found = cycle_engine.pillar_interactions(hong_kong_chart, Pillar.from_glyphs("丙子"))
    assert {(i.kind, i.natal_position) for i in found} == {("clash", "year"), ("stem_combination", "day")}
    clash = next(i for i in found if i.kind == "clash")
    assert clash.describe() == "clash: natal year 午 with 子"


def test_three_harmony_is_opt_in(hong_kong_chart):
    plain = cycle_engine.pillar_interactions(hong_kong_chart, Pillar.from_glyphs("甲寅"))
    extended = cycle_engine.pillar_interactions(hong_kong_chart, Pillar.from_glyphs("甲寅"), three_harmony=True)
    assert not any(i.kind == "three_harmony" for i in plain)
    # 寅 joins 午 and 戌
    assert {i.natal_position for i in extended if i.kind == "three_harmony"} == {"year", "month"}


def test_cycles_need_birth_data():
    with pytest.raises(InputValidationError):
        cycle_engine.cycles_report(FourPillarsChart.from_pillars("丙午 戊戌 辛亥 戊子"), 2000, 2001)


def test_cycles_json(hong_kong_chart):
    report = cycle_engine.cycles_report(hong_kong_chart, 1994, 1994, count=2)
    data = cycles_to_dict(report, hong_kong_chart)
    assert data["format"] == "cycles/v1"
    assert data["direction"] == "Backward"
    assert data["flowing"][0]["pillar"] == "甲戌"
    assert "interactions" in data["flowing"][0]


def test_flowing_months_of_the_last_supported_year(hong_kong_chart):
    report = cycle_engine.cycles_report(hong_kong_chart, 2100, 2100, include_months=True)
    years = [f for f in report.flowing if f.granularity is Granularity.YEAR]
    months = [f for f in report.flowing if f.granularity is Granularity.MONTH]
    assert [f.pillar.glyphs for f in years] == ["庚申"]
    assert [f.pillar.glyphs for f in months] == [
        "戊寅", "己卯", "庚辰", "辛巳", "壬午", "癸未", "甲申", "乙酉", "丙戌", "丁亥", "戊子", "己丑",
    ]
    assert months[-1].period_start.year == 2101
    assert months[-1].period_start.month == 1
