import random
from datetime import date, datetime, timedelta

import pytest

from bazi.calendrics import (
    CivilDateTime,
    GeoLocation,
    SolarInstant,
    SolarTimeMode,
    from_julian_date,
    solar_term_instant,
    true_solar_time,
)
from bazi.chart import (
    BRANCHES,
    STEMS,
    FourPillarsChart,
    Gender,
    LateZiPolicy,
    Pillar,
    chart_builder,
    chart_to_dict,
    pillar_from_index,
)
from errors import ChartBuildError, InputValidationError

# Perpetual-calendar day pillars at noon
DAY_PILLARS = [
    ((1900, 1, 1), "甲戌", 10),
    ((1925, 6, 15), "庚午", 6),
    ((1949, 10, 1), "甲子", 0),
    ((1966, 10, 18), "庚戌", 46),
    ((1985, 3, 10), "戊申", 44),
    ((2000, 1, 1), "戊午", 54),
    ((2008, 8, 8), "庚辰", 16),
    ((2020, 1, 25), "丁卯", 3),
    ((2024, 2, 10), "甲辰", 40),
    ((2030, 12, 25), "甲午", 30),
]

GREENWICH = GeoLocation(0.0, 51.48)


def _civil_noon(y, m, d):
    return CivilDateTime(y, m, d, 12, 0, 0)


@pytest.mark.parametrize("ymd,glyphs,index", DAY_PILLARS)
def test_day_pillar_matches_perpetual_calendar(ymd, glyphs, index):
    chart = chart_builder.build_chart(_civil_noon(*ymd), GREENWICH, Gender.MALE, solar_time=SolarTimeMode.CIVIL)
    assert chart.day.glyphs == glyphs
    assert chart.day.sexagenary_index == index


def test_day_pillar_cycles_every_sixty_days():
    rng = random.Random(60)
    start = date(1900, 3, 1)
    span = (date(2100, 10, 1) - start).days
    for _ in range(10_000):
        d = start + timedelta(days=rng.randrange(span))
        later = d + timedelta(days=60)
        next_day = d + timedelta(days=1)
        a = chart_builder.day_pillar(_solar(d))
        assert chart_builder.day_pillar(_solar(later)) == a
        assert chart_builder.day_pillar(_solar(next_day)).sexagenary_index == (a.sexagenary_index + 1) % 60


def _solar(d: date):
    return true_solar_time(CivilDateTime(d.year, d.month, d.day, 12, 0), GREENWICH, SolarTimeMode.CIVIL)


def test_sample_card_chart(hong_kong_chart):
    assert hong_kong_chart.glyphs == "丙午 戊戌 辛亥 戊子"
    assert hong_kong_chart.year.glyphs == "丙午"
    assert hong_kong_chart.hour.branch.glyph == "子"
    assert hong_kong_chart.late_zi_applied
    assert hong_kong_chart.day_master.glyph == "辛"


def test_sample_card_same_day_policy(hong_kong_birth):
    chart = chart_builder.build_chart(*hong_kong_birth, late_zi_policy=LateZiPolicy.SAME_DAY)
    assert chart.glyphs == "丙午 戊戌 庚戌 丙子"
    assert not chart.late_zi_applied


def test_chart_json_echoes_conventions(hong_kong_chart):
    data = chart_to_dict(hong_kong_chart)
    assert data["format"] == "chart/v1"
    assert data["config"] == {"late_zi_policy": "next_day", "solar_time": "apparent"}
    assert data["pillars"]["year"]["glyphs"] == "丙午"
    assert data["civil_birth"] == {"iso_local": "1966-10-18T23:15", "utc_offset_minutes": 480}
    assert sum(data["element_tally"]["visible"].values()) == 8


def test_year_changes_at_lichun_not_new_year():
    loc = GeoLocation(120.0, 30.0)
    before = chart_builder.build_chart(CivilDateTime(2024, 2, 4, 12, 0, 480), loc, Gender.MALE,
                                       solar_time=SolarTimeMode.CIVIL)
    after = chart_builder.build_chart(CivilDateTime(2024, 2, 4, 20, 0, 480), loc, Gender.MALE,
                                      solar_time=SolarTimeMode.CIVIL)
    assert before.year.glyphs == "癸卯"
    assert before.month.glyphs == "乙丑"
    assert after.year.glyphs == "甲辰"
    assert after.month.glyphs == "丙寅"


def test_hour_pillar_follows_day_stem():
    # 甲 and 己 days open with 甲子
    chart = FourPillarsChart.from_pillars("甲子 丙寅 甲子 甲子")
    assert chart.hour.glyphs == "甲子"
    day = Pillar.from_glyphs("己巳")
    solar = _solar(date(2000, 1, 1))
    assert chart_builder.hour_pillar(solar, day.stem).glyphs == "庚午"


def test_pillars_are_parity_matched():
    assert all(pillar_from_index(n).stem.index % 2 == pillar_from_index(n).branch.index % 2 for n in range(60))
    with pytest.raises(InputValidationError):
        Pillar(STEMS[0], BRANCHES[1])
    assert Pillar.from_glyphs("癸亥").sexagenary_index == 59
    assert pillar_from_index(59).advance(1).glyphs == "甲子"


def test_built_charts_are_parity_matched():
    rng = random.Random(1984)
    first = datetime(1900, 1, 1)
    span = int((datetime(2100, 12, 31, 23, 59) - first).total_seconds() // 60)
    for _ in range(10_000):
        wall = first + timedelta(minutes=rng.randint(0, span))
        civil = CivilDateTime.from_datetime(wall, rng.choice((-300, 0, 330, 480, 540)))
        loc = GeoLocation(rng.uniform(-180.0, 180.0), rng.uniform(-60.0, 60.0))
        chart = chart_builder.build_chart(civil, loc, rng.choice(list(Gender)))
        for pillar in chart.pillars:
            assert pillar.stem.index % 2 == pillar.branch.index % 2, chart.glyphs


def _pillars_at(jd_utc: float):
    instant = SolarInstant(jd_utc, from_julian_date(jd_utc))
    year = chart_builder.year_pillar(instant)
    return year, chart_builder.month_pillar(instant, year.stem)


@pytest.mark.parametrize("year", [1900, 1966, 2024, 2100])
def test_month_turns_one_second_around_each_jie(year):
    for m in range(12):
        jd = solar_term_instant(year, 2 * m).instant.jd_utc
        year_before, month_before = _pillars_at(jd - 1 / 86400.0)
        year_after, month_after = _pillars_at(jd + 1 / 86400.0)
        assert month_before.branch.index == (m + 1) % 12
        assert month_after.branch.index == (m + 2) % 12
        assert month_after == month_before.advance(1)
        if m == 0:
            assert year_after == year_before.advance(1)
        else:
            assert year_after == year_before


def test_build_errors_carry_stage():
    with pytest.raises(ChartBuildError) as info:
        chart_builder.build_chart(CivilDateTime(2101, 1, 1), GREENWICH, Gender.MALE)
    assert info.value.stage == "true_solar_time"
