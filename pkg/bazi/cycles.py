"""
Luck pillars (大运), flowing year/month/day pillars and their interactions
with the natal chart.
"""

import math
from dataclasses import dataclass
from datetime import timedelta
from enum import Enum
from typing import Any, Dict, List, Optional

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
    POSITIONS,
    FourPillarsChart,
    Gender,
    LateZiPolicy,
    Pillar,
    Polarity,
    Stem,
    chart_builder,
)
from errors import InputValidationError


class Direction(Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"

    @property
    def step(self) -> int:
        return 1 if self is Direction.FORWARD else -1


class Granularity(Enum):
    YEAR = "Year"
    MONTH = "Month"
    DAY = "Day"


@dataclass(frozen=True)
class LuckPillar:
    pillar: Pillar
    start_age_years: float
    start_civil_year: int
    ordinal: int


@dataclass(frozen=True)
class FlowingPillar:
    granularity: Granularity
    period_start: CivilDateTime
    pillar: Pillar


@dataclass(frozen=True)
class Interaction:
    kind: str              # clash | six_combination | stem_combination | three_harmony
    natal_position: str
    natal: str
    flowing: str

    def describe(self) -> str:
        return f"{self.kind.replace('_', ' ')}: natal {self.natal_position} {self.natal} with {self.flowing}"


@dataclass(frozen=True)
class CyclesReport:
    direction: Direction
    luck_pillars: List[LuckPillar]
    flowing: List[FlowingPillar]


class CycleEngine:
    """Temporal dynamics for a natal chart."""

    DAYS_PER_YEAR_OF_LUCK = 3       # three days of gap = one year of age
    YEARS_PER_LUCK_PILLAR = 10
    MAX_LUCK_PILLARS = 12

    CLASH_DISTANCE = 6
    SIX_COMBINATION_SUM = 1         # (a + b) mod 12 == 1 pairs 子丑, 寅亥, 卯戌, 辰酉, 巳申, 午未
    STEM_COMBINATION_DISTANCE = 5
    MONTH_PROBE_DAYS = 7.0

    # ==================== Luck pillars ====================

    def luck_direction(self, year_stem: Stem, gender: Gender) -> Direction:
        yang = year_stem.polarity is Polarity.YANG
        male = gender is Gender.MALE
        return Direction.FORWARD if yang == male else Direction.BACKWARD

    def adjacent_jie(self, birth: SolarInstant, direction: Direction) -> SolarInstant:
        """Jie term that closes (Forward) or opened (Backward) the birth month."""
        m = chart_builder.month_index(birth)
        g = chart_builder.sexagenary_year(birth)
        if direction is Direction.FORWARD:
            term = solar_term_instant(g + 1, 0) if m == 11 else solar_term_instant(g, 2 * (m + 1))
        else:
            term = solar_term_instant(g, 2 * m)
        return term.instant

    def start_age(self, birth: SolarInstant, direction: Direction) -> float:
        """Whole days to the adjacent jie divided by three; leftover hours are ignored."""
        jie = self.adjacent_jie(birth, direction)
        gap_days = abs(jie.jd_utc - birth.jd_utc)
        return math.floor(gap_days + 1e-9) / self.DAYS_PER_YEAR_OF_LUCK

    def luck_pillars(self, chart: FourPillarsChart, birth: SolarInstant, count: int = 8) -> List[LuckPillar]:
        if not 1 <= count <= self.MAX_LUCK_PILLARS:
            raise InputValidationError(f"luck pillar count must be in 1..{self.MAX_LUCK_PILLARS}, got {count}")
        direction = self.luck_direction(chart.year.stem, chart.gender)
        first_age = self.start_age(birth, direction)
        birth_year = chart.civil.year if chart.civil is not None else birth.local_true_solar.year

        pillars = []
        for ordinal in range(1, count + 1):
            age = first_age + self.YEARS_PER_LUCK_PILLAR * (ordinal - 1)
            pillars.append(LuckPillar(
                pillar=chart.month.advance(direction.step * ordinal),
                start_age_years=age,
                start_civil_year=birth_year + math.floor(age),
                ordinal=ordinal,
            ))
        return pillars

    # ==================== Flowing pillars ====================

    def flowing_pillar(
        self,
        granularity: Granularity,
        civil: CivilDateTime,
        loc: GeoLocation,
        late_zi_policy: LateZiPolicy = LateZiPolicy.NEXT_DAY,
        solar_time: SolarTimeMode = SolarTimeMode.APPARENT,
    ) -> FlowingPillar:
        instant = true_solar_time(civil, loc, solar_time)
        if granularity is Granularity.YEAR:
            pillar = chart_builder.year_pillar(instant)
        elif granularity is Granularity.MONTH:
            pillar = chart_builder.month_pillar(instant, chart_builder.year_pillar(instant).stem)
        else:
            pillar = chart_builder.day_pillar(instant, late_zi_policy)
        return FlowingPillar(granularity, civil, pillar)

    def flowing_years(self, start_year: int, end_year: int, loc: GeoLocation, utc_offset_minutes: int = 0) -> List[FlowingPillar]:
        """One pillar per solar year, period starting at that year's Lichun."""
        result = []
        for year in range(start_year, end_year + 1):
            lichun = solar_term_instant(year, 0).instant
            start = from_julian_date(lichun.jd_utc, utc_offset_minutes)
            probe = CivilDateTime(year, 7, 1, 12, 0, utc_offset_minutes)
            flowing = self.flowing_pillar(Granularity.YEAR, probe, loc, solar_time=SolarTimeMode.CIVIL)
            result.append(FlowingPillar(Granularity.YEAR, start, flowing.pillar))
        return result

    def flowing_months(self, year: int, utc_offset_minutes: int = 0) -> List[FlowingPillar]:
        """
        Twelve month pillars of a solar year, each starting at its jie.

        Pillars are read from the ephemeris instant a week past each jie; the
        丑 month of 2100 opens in January 2101, outside the civil window.
        """
        result = []
        for m in range(12):
            jie = solar_term_instant(year, 2 * m).instant
            start = from_julian_date(jie.jd_utc, utc_offset_minutes)
            probe_jd = jie.jd_utc + self.MONTH_PROBE_DAYS
            probe = SolarInstant(probe_jd, from_julian_date(probe_jd, utc_offset_minutes))
            pillar = chart_builder.month_pillar(probe, chart_builder.year_pillar(probe).stem)
            result.append(FlowingPillar(Granularity.MONTH, start, pillar))
        return result

    def flowing_days(self, start: CivilDateTime, days: int, loc: GeoLocation) -> List[FlowingPillar]:
        result = []
        for offset in range(days):
            noon = start.to_datetime().replace(hour=12, minute=0) + timedelta(days=offset)
            civil = CivilDateTime.from_datetime(noon, start.utc_offset_minutes)
            flowing = self.flowing_pillar(Granularity.DAY, civil, loc, solar_time=SolarTimeMode.CIVIL)
            day_start = CivilDateTime.from_datetime(noon.replace(hour=0), start.utc_offset_minutes)
            result.append(FlowingPillar(Granularity.DAY, day_start, flowing.pillar))
        return result

    # ==================== Interactions ====================

    def pillar_interactions(self, chart: FourPillarsChart, other: Pillar, three_harmony: bool = False) -> List[Interaction]:
        found = []
        for position in POSITIONS:
            natal = chart.pillar_at(position)
            a, b = natal.branch.index, other.branch.index
            if (a - b) % 12 == self.CLASH_DISTANCE:
                found.append(Interaction("clash", position, natal.branch.glyph, other.branch.glyph))
            if (a + b) % 12 == self.SIX_COMBINATION_SUM:
                found.append(Interaction("six_combination", position, natal.branch.glyph, other.branch.glyph))
            if three_harmony and a != b and a % 4 == b % 4:
                found.append(Interaction("three_harmony", position, natal.branch.glyph, other.branch.glyph))
            if (natal.stem.index - other.stem.index) % 10 == self.STEM_COMBINATION_DISTANCE:
                found.append(Interaction("stem_combination", position, natal.stem.glyph, other.stem.glyph))
        return found

    def interactions(self, chart: FourPillarsChart, flowing: FlowingPillar, three_harmony: bool = False) -> List[Interaction]:
        return self.pillar_interactions(chart, flowing.pillar, three_harmony)

    # ==================== Report ====================

    def cycles_report(
        self,
        chart: FourPillarsChart,
        start_year: int,
        end_year: int,
        count: int = 8,
        include_months: bool = False,
        include_days: bool = False,
    ) -> CyclesReport:
        """Luck pillars plus flowing pillars for the civil years ``start_year``..``end_year``."""
        if chart.birth is None or chart.location is None:
            raise InputValidationError("cycles need a chart built from birth data")
        if end_year < start_year:
            raise InputValidationError("end_year precedes start_year")
        offset = chart.civil.utc_offset_minutes if chart.civil else 0
        direction = self.luck_direction(chart.year.stem, chart.gender)
        flowing = self.flowing_years(start_year, end_year, chart.location, offset)
        if include_months:
            for year in range(start_year, end_year + 1):
                flowing.extend(self.flowing_months(year, offset))
        if include_days:
            for year in range(start_year, end_year + 1):
                first = CivilDateTime(year, 1, 1, 0, 0, offset)
                span = (CivilDateTime(year, 12, 31).to_datetime() - first.to_datetime()).days + 1
                flowing.extend(self.flowing_days(first, span, chart.location))
        return CyclesReport(direction, self.luck_pillars(chart, chart.birth, count), flowing)


cycle_engine = CycleEngine()


def cycles_to_dict(report: CyclesReport, chart: Optional[FourPillarsChart] = None, three_harmony: bool = False) -> Dict[str, Any]:
    def flowing_entry(f: FlowingPillar) -> Dict[str, Any]:
        entry = {
            "granularity": f.granularity.value,
            "period_start": f.period_start.isoformat(),
            "pillar": f.pillar.glyphs,
            "sexagenary_index": f.pillar.sexagenary_index,
        }
        if chart is not None:
            entry["interactions"] = [
                {"kind": i.kind, "natal_position": i.natal_position, "natal": i.natal, "flowing": i.flowing}
                for i in cycle_engine.interactions(chart, f, three_harmony)
            ]
        return entry

    return {
        "format": "cycles/v1",
        "direction": report.direction.value,
        "luck_pillars": [
            {
                "ordinal": lp.ordinal,
                "pillar": lp.pillar.glyphs,
                "sexagenary_index": lp.pillar.sexagenary_index,
                "start_age_years": round(lp.start_age_years, 6),
                "start_civil_year": lp.start_civil_year,
            }
            for lp in report.luck_pillars
        ],
        "flowing": [flowing_entry(f) for f in report.flowing],
    }
