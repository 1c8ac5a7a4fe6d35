import random
from datetime import datetime, timedelta

import pytest
from lunar_python import Solar

from bazi.calendrics import (
    MAX_UTC_OFFSET_MINUTES,
    CivilDateTime,
    GeoLocation,
    SolarTimeMode,
    apparent_solar_longitude,
    delta_t_seconds,
    equation_of_time,
    from_julian_date,
    jd_to_datetime,
    solar_term_instant,
    solar_terms_for_year,
    to_julian_date,
    true_solar_time,
)
from errors import InputValidationError, OutOfWindowError

# Almanac instants in UTC. Index 0 is Lichun of the given year.
ALMANAC_UTC = [
    (2000, 3, "2000-03-20 07:35"),
    (2000, 9, "2000-06-21 01:48"),
    (2000, 15, "2000-09-22 17:28"),
    (2000, 21, "2000-12-21 13:37"),
    (2024, 0, "2024-02-04 08:27"),
    (2024, 1, "2024-02-19 04:13"),
    (2024, 2, "2024-03-05 02:23"),
    (2024, 3, "2024-03-20 03:06"),
    (2024, 4, "2024-04-04 07:02"),
    (2024, 5, "2024-04-19 13:59"),
    (2024, 6, "2024-05-05 00:10"),
    (2024, 7, "2024-05-20 12:59"),
    (2024, 8, "2024-06-05 04:10"),
    (2024, 9, "2024-06-20 20:51"),
    (2024, 10, "2024-07-06 14:20"),
    (2024, 11, "2024-07-22 07:44"),
    (2024, 12, "2024-08-07 00:09"),
    (2024, 13, "2024-08-22 14:55"),
    (2024, 14, "2024-09-07 03:11"),
    (2024, 15, "2024-09-22 12:44"),
    (2024, 16, "2024-10-07 19:00"),
    (2024, 17, "2024-10-22 22:15"),
    (2024, 18, "2024-11-06 22:20"),
    (2024, 19, "2024-11-21 19:56"),
    (2024, 20, "2024-12-06 15:17"),
    (2024, 21, "2024-12-21 09:20"),
    (2024, 22, "2025-01-05 02:33"),
    (2024, 23, "2025-01-19 20:00"),
]

# Reference tables are in Beijing time; the terms around the lunar new year
# come back under pinyin keys.
BEIJING = timedelta(hours=8)
PINYIN_TERM_KEYS = {
    "DA_XUE": "大雪", "DONG_ZHI": "冬至", "XIAO_HAN": "小寒", "DA_HAN": "大寒",
    "LI_CHUN": "立春", "YU_SHUI": "雨水", "JING_ZHE": "惊蛰",
}


@pytest.mark.parametrize("year,index,expected", ALMANAC_UTC)
def test_solar_term_matches_almanac(year, index, expected):
    term = solar_term_instant(year, index)
    got = jd_to_datetime(term.instant.jd_utc)
    want = datetime.strptime(expected, "%Y-%m-%d %H:%M")
    assert abs((got - want).total_seconds()) <= 120, f"{term.name} {year}: {got} vs {want}"


def _reference_term_after(utc: datetime):
    local = utc + BEIJING - timedelta(days=2)
    lunar = Solar.fromYmdHms(local.year, local.month, local.day, local.hour, local.minute, local.second).getLunar()
    term = lunar.getNextJieQi(False)
    name = PINYIN_TERM_KEYS.get(term.getName(), term.getName())
    return name, datetime.strptime(term.getSolar().toYmdHms(), "%Y-%m-%d %H:%M:%S") - BEIJING


@pytest.mark.parametrize("year", [1966, 2000, 2024])
def test_every_term_matches_reference_tables(year):
    for term in solar_terms_for_year(year):
        got = jd_to_datetime(term.instant.jd_utc)
        name, want = _reference_term_after(got)
        assert name == term.glyph, f"{term.name} {year}: reference gave {name}"
        assert abs((got - want).total_seconds()) <= 120, f"{term.name} {year}: {got} vs {want}"


def test_solar_terms_for_year_are_ordered_and_complete():
    for year in (1966, 2000, 2024):
        terms = solar_terms_for_year(year)
        assert [t.index for t in terms] == list(range(24))
        jds = [t.instant.jd_utc for t in terms]
        assert jds == sorted(jds)
        gaps = [b - a for a, b in zip(jds, jds[1:])]
        assert all(14.0 < g < 16.5 for g in gaps)
        for t in terms:
            residual = (apparent_solar_longitude(t.instant.jd_utc) - t.target_longitude_deg + 180) % 360 - 180
            assert abs(residual) < 1e-4


def test_lichun_1966_falls_on_february_4():
    term = solar_term_instant(1966, 0)
    assert term.name == "Lichun" and term.glyph == "立春" and term.is_jie
    assert jd_to_datetime(term.instant.jd_utc).date() == datetime(1966, 2, 4).date()


def test_julian_date_round_trip():
    civil = CivilDateTime(1966, 10, 18, 23, 15, 480)
    jd = to_julian_date(civil)
    assert from_julian_date(jd, 480) == civil
    assert to_julian_date(CivilDateTime(2000, 1, 1, 12, 0)) == pytest.approx(2451545.0)


def test_julian_date_round_trip_across_the_window():
    rng = random.Random(20240204)
    first = datetime(1900, 1, 1)
    span = int((datetime(2100, 12, 31, 23, 59) - first).total_seconds() // 60)
    for _ in range(10_000):
        wall = first + timedelta(minutes=rng.randint(0, span))
        civil = CivilDateTime.from_datetime(wall, rng.randint(-MAX_UTC_OFFSET_MINUTES, MAX_UTC_OFFSET_MINUTES))
        assert from_julian_date(to_julian_date(civil), civil.utc_offset_minutes) == civil, civil


def test_civil_datetime_validation():
    with pytest.raises(InputValidationError):
        CivilDateTime(2023, 2, 29)
    with pytest.raises(InputValidationError):
        CivilDateTime(2000, 1, 1, utc_offset_minutes=900)
    with pytest.raises(InputValidationError):
        GeoLocation(181.0)


def test_out_of_window_inputs_are_rejected():
    with pytest.raises(OutOfWindowError):
        true_solar_time(CivilDateTime(1899, 12, 31, 12), GeoLocation(0.0))
    with pytest.raises(OutOfWindowError):
        solar_term_instant(2101, 0)
    with pytest.raises(InputValidationError):
        solar_term_instant(2000, 24)


def test_equation_of_time_known_extremes():
    # about +16.4 min in early November, about -14.2 min in mid February
    november = equation_of_time(to_julian_date(CivilDateTime(2024, 11, 3, 12)))
    february = equation_of_time(to_julian_date(CivilDateTime(2024, 2, 11, 12)))
    assert november == pytest.approx(16.4, abs=0.3)
    assert february == pytest.approx(-14.2, abs=0.3)


def test_true_solar_time_modes():
    civil = CivilDateTime(1966, 10, 18, 23, 15, 480)
    loc = GeoLocation(114.17, 22.3)

    plain = true_solar_time(civil, loc, SolarTimeMode.CIVIL)
    assert plain.local_true_solar == civil

    mean = true_solar_time(civil, loc, SolarTimeMode.MEAN)
    # 5.83 degrees west of the zone meridian is 23.32 minutes
    assert mean.local_true_solar.to_datetime() == datetime(1966, 10, 18, 22, 51)

    apparent = true_solar_time(civil, loc, SolarTimeMode.APPARENT, eot_fn=lambda jd: 10.0)
    assert apparent.local_true_solar.to_datetime() == datetime(1966, 10, 18, 23, 1)
    assert apparent.jd_utc == plain.jd_utc


def test_delta_t_is_plausible():
    assert delta_t_seconds(2000.0) == pytest.approx(63.8, abs=1.0)
    assert delta_t_seconds(1966.0) == pytest.approx(36.5, abs=1.5)
