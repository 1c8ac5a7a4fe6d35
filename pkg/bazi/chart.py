"""
Four Pillars chart construction.

Maps a corrected birth instant to the eight symbols (four stem/branch pairs)
using solar-term month boundaries, the Five Tigers rule for month stems and
the Five Rats rule for hour stems.
"""

import json
from dataclasses import dataclass
from datetime import timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import structlog

from bazi.calendrics import (
    CivilDateTime,
    GeoLocation,
    SolarInstant,
    SolarTimeMode,
    apparent_solar_longitude,
    jd_to_datetime,
    true_solar_time,
)
from errors import BaziError, ChartBuildError, InputValidationError

logger = structlog.get_logger(__name__)

DATA_DIR = Path(__file__).parent / "data"
CHART_FORMAT_VERSION = "chart/v1"


# ==================== Elements and polarity ====================

class Element(Enum):
    """Five Elements in generation order: each generates the next, controls the one after."""
    WOOD = 0
    FIRE = 1
    EARTH = 2
    METAL = 3
    WATER = 4

    @property
    def glyph(self) -> str:
        return "木火土金水"[self.value]

    @property
    def label(self) -> str:
        return self.name.capitalize()

    def generates(self) -> "Element":
        return Element((self.value + 1) % 5)

    def controls(self) -> "Element":
        return Element((self.value + 2) % 5)

    def generated_by(self) -> "Element":
        return Element((self.value - 1) % 5)

    def controlled_by(self) -> "Element":
        return Element((self.value - 2) % 5)


class Polarity(Enum):
    YANG = "Yang"
    YIN = "Yin"


class Gender(Enum):
    MALE = "male"
    FEMALE = "female"

    @classmethod
    def parse(cls, text: str) -> "Gender":
        lowered = str(text).strip().lower()
        if lowered in ("m", "male", "man"):
            return cls.MALE
        if lowered in ("f", "female", "woman"):
            return cls.FEMALE
        raise InputValidationError(f"gender must be m or f, got {text!r}", field="gender")


class LateZiPolicy(Enum):
    """Day attribution for births between 23:00 and 24:00 local solar time."""
    NEXT_DAY = "next_day"
    SAME_DAY = "same_day"


STEM_GLYPHS = "甲乙丙丁戊己庚辛壬癸"
STEM_PINYIN = ("Jia", "Yi", "Bing", "Ding", "Wu", "Ji", "Geng", "Xin", "Ren", "Gui")
BRANCH_GLYPHS = "子丑寅卯辰巳午未申酉戌亥"
BRANCH_PINYIN = ("Zi", "Chou", "Yin", "Mao", "Chen", "Si", "Wu", "Wei", "Shen", "You", "Xu", "Hai")
BRANCH_ELEMENTS = (
    Element.WATER, Element.EARTH, Element.WOOD, Element.WOOD, Element.EARTH, Element.FIRE,
    Element.FIRE, Element.EARTH, Element.METAL, Element.METAL, Element.EARTH, Element.WATER,
)
POSITIONS = ("year", "month", "day", "hour")


# ==================== Symbols ====================

@dataclass(frozen=True)
class Stem:
    index: int

    def __post_init__(self):
        if not 0 <= self.index <= 9:
            raise InputValidationError(f"stem index must be in 0..9, got {self.index}")

    @property
    def element(self) -> Element:
        return Element(self.index // 2)

    @property
    def polarity(self) -> Polarity:
        return Polarity.YANG if self.index % 2 == 0 else Polarity.YIN

    @property
    def glyph(self) -> str:
        return STEM_GLYPHS[self.index]

    @property
    def pinyin(self) -> str:
        return STEM_PINYIN[self.index]

    @classmethod
    def from_glyph(cls, glyph: str) -> "Stem":
        if glyph not in STEM_GLYPHS:
            raise InputValidationError(f"unknown stem glyph {glyph!r}")
        return STEMS[STEM_GLYPHS.index(glyph)]


STEMS: Tuple[Stem, ...] = tuple(Stem(i) for i in range(10))


def _load_hidden_stems() -> Dict[str, Tuple[Tuple[Stem, float], ...]]:
    raw = json.loads((DATA_DIR / "hidden_stems.json").read_text(encoding="utf-8"))
    table = {}
    for branch_glyph, entries in raw["branches"].items():
        table[branch_glyph] = tuple((STEMS[STEM_GLYPHS.index(s)], float(w)) for s, w in entries)
    return table


HIDDEN_STEMS = _load_hidden_stems()


@dataclass(frozen=True)
class Branch:
    index: int

    def __post_init__(self):
        if not 0 <= self.index <= 11:
            raise InputValidationError(f"branch index must be in 0..11, got {self.index}")

    @property
    def element(self) -> Element:
        return BRANCH_ELEMENTS[self.index]

    @property
    def polarity(self) -> Polarity:
        return Polarity.YANG if self.index % 2 == 0 else Polarity.YIN

    @property
    def glyph(self) -> str:
        return BRANCH_GLYPHS[self.index]

    @property
    def pinyin(self) -> str:
        return BRANCH_PINYIN[self.index]

    @property
    def hidden_stems(self) -> Tuple[Tuple[Stem, float], ...]:
        """Principal stem first; weights sum to 1."""
        return HIDDEN_STEMS[self.glyph]

    @property
    def principal_stem(self) -> Stem:
        return self.hidden_stems[0][0]

    @classmethod
    def from_glyph(cls, glyph: str) -> "Branch":
        if glyph not in BRANCH_GLYPHS:
            raise InputValidationError(f"unknown branch glyph {glyph!r}")
        return BRANCHES[BRANCH_GLYPHS.index(glyph)]


BRANCHES: Tuple[Branch, ...] = tuple(Branch(i) for i in range(12))


@dataclass(frozen=True)
class Pillar:
    stem: Stem
    branch: Branch

    def __post_init__(self):
        if self.stem.polarity != self.branch.polarity:
            raise InputValidationError(
                f"{self.stem.glyph}{self.branch.glyph} is not a sexagenary pair (polarity mismatch)"
            )

    @property
    def sexagenary_index(self) -> int:
        # n ≡ stem (mod 10), n ≡ branch (mod 12)
        return (6 * self.stem.index - 5 * self.branch.index) % 60

    @property
    def glyphs(self) -> str:
        return self.stem.glyph + self.branch.glyph

    @property
    def pinyin(self) -> str:
        return f"{self.stem.pinyin}-{self.branch.pinyin}"

    @classmethod
    def from_index(cls, n: int) -> "Pillar":
        n %= 60
        return cls(STEMS[n % 10], BRANCHES[n % 12])

    @classmethod
    def from_glyphs(cls, text: str) -> "Pillar":
        if len(text) != 2:
            raise InputValidationError(f"pillar must be two glyphs, got {text!r}")
        return cls(Stem.from_glyph(text[0]), Branch.from_glyph(text[1]))

    def advance(self, steps: int) -> "Pillar":
        return Pillar.from_index(self.sexagenary_index + steps)

    def __str__(self) -> str:
        return self.glyphs


def pillar_from_index(n: int) -> Pillar:
    return Pillar.from_index(n)


@dataclass(frozen=True)
class FourPillarsChart:
    year: Pillar
    month: Pillar
    day: Pillar
    hour: Pillar
    gender: Gender
    birth: Optional[SolarInstant] = None
    late_zi_applied: bool = False
    late_zi_policy: LateZiPolicy = LateZiPolicy.NEXT_DAY
    solar_time: SolarTimeMode = SolarTimeMode.APPARENT
    civil: Optional[CivilDateTime] = None
    location: Optional[GeoLocation] = None

    @property
    def day_master(self) -> Stem:
        return self.day.stem

    @property
    def pillars(self) -> Tuple[Pillar, Pillar, Pillar, Pillar]:
        return (self.year, self.month, self.day, self.hour)

    def pillar_at(self, position: str) -> Pillar:
        return getattr(self, position)

    @property
    def glyphs(self) -> str:
        return " ".join(p.glyphs for p in self.pillars)

    @classmethod
    def from_pillars(cls, text: str, gender: Gender = Gender.FEMALE) -> "FourPillarsChart":
        """Synthetic chart from glyphs such as "丙午 戊戌 辛亥 戊子" (no birth instant)."""
        parts = text.split()
        if len(parts) != 4:
            raise InputValidationError(f"expected four pillars, got {text!r}")
        year, month, day, hour = (Pillar.from_glyphs(p) for p in parts)
        return cls(year, month, day, hour, gender)


@dataclass(frozen=True)
class ElementTally:
    visible: Dict[Element, int]
    hidden_weighted: Dict[Element, float]

    def dominant(self) -> List[Element]:
        """Elements with the highest hidden-weighted share."""
        top = max(self.hidden_weighted.values())
        return [e for e in Element if abs(self.hidden_weighted[e] - top) < 1e-9]

    def deficient(self) -> List[Element]:
        """Elements with the lowest hidden-weighted share."""
        low = min(self.hidden_weighted.values())
        return [e for e in Element if abs(self.hidden_weighted[e] - low) < 1e-9]


# ==================== Chart builder ====================

class ChartBuilder:
    """
    Builds Four Pillars charts.

    Anchors are conventions checked against perpetual calendars:
    1984 is a 甲子 year, and JDN 2451545 (2000-01-01) is a 戊午 day.
    """

    YEAR_ANCHOR = 4             # (G - 4) mod 60 is the sexagenary year index
    DAY_ANCHOR_OFFSET = 49      # (JDN + 49) mod 60 is the sexagenary day index
    JDN_ORDINAL_OFFSET = 1721425
    LICHUN_LONGITUDE = 315.0
    LATE_ZI_HOUR = 23

    # ==================== Boundaries ====================

    def month_index(self, instant: SolarInstant) -> int:
        """0 for the 寅 month opened by Lichun through 11 for the 丑 month."""
        longitude = apparent_solar_longitude(instant.jd_utc)
        return int(((longitude - self.LICHUN_LONGITUDE) % 360.0) // 30.0)

    def sexagenary_year(self, instant: SolarInstant) -> int:
        """Gregorian year whose Lichun most recently preceded the instant."""
        utc = jd_to_datetime(instant.jd_utc)
        if utc.month <= 2 and self.month_index(instant) >= 10:
            return utc.year - 1
        return utc.year

    # ==================== Pillars ====================

    def year_pillar(self, instant: SolarInstant) -> Pillar:
        g = self.sexagenary_year(instant)
        return Pillar(STEMS[(g - self.YEAR_ANCHOR) % 10], BRANCHES[(g - self.YEAR_ANCHOR) % 12])

    def month_pillar(self, instant: SolarInstant, year_stem: Stem) -> Pillar:
        m = self.month_index(instant)
        first_stem = ((year_stem.index % 5) * 2 + 2) % 10
        return Pillar(STEMS[(first_stem + m) % 10], BRANCHES[(m + 2) % 12])

    def is_late_zi(self, instant: SolarInstant) -> bool:
        return instant.local_true_solar.hour >= self.LATE_ZI_HOUR

    def day_pillar(self, instant: SolarInstant, policy: LateZiPolicy = LateZiPolicy.NEXT_DAY) -> Pillar:
        local = instant.local_true_solar.to_datetime()
        if policy is LateZiPolicy.NEXT_DAY and self.is_late_zi(instant):
            local += timedelta(days=1)
        jdn = local.date().toordinal() + self.JDN_ORDINAL_OFFSET
        return Pillar.from_index((jdn + self.DAY_ANCHOR_OFFSET) % 60)

    def hour_pillar(self, instant: SolarInstant, day_stem: Stem) -> Pillar:
        branch = ((instant.local_true_solar.hour + 1) % 24) // 2
        zi_stem = ((day_stem.index % 5) * 2) % 10
        return Pillar(STEMS[(zi_stem + branch) % 10], BRANCHES[branch])

    # ==================== Chart ====================

    def build_chart(
        self,
        birth: CivilDateTime,
        loc: GeoLocation,
        gender: Gender,
        late_zi_policy: LateZiPolicy = LateZiPolicy.NEXT_DAY,
        solar_time: SolarTimeMode = SolarTimeMode.APPARENT,
        eot_fn=None,
    ) -> FourPillarsChart:
        stage = "true_solar_time"
        try:
            instant = true_solar_time(birth, loc, solar_time, eot_fn=eot_fn)
            stage = "year_pillar"
            year = self.year_pillar(instant)
            stage = "month_pillar"
            month = self.month_pillar(instant, year.stem)
            stage = "day_pillar"
            day = self.day_pillar(instant, late_zi_policy)
            stage = "hour_pillar"
            hour = self.hour_pillar(instant, day.stem)
        except ChartBuildError:
            raise
        except BaziError as e:
            logger.warning("chart_build_failed", stage=stage, error=str(e))
            raise ChartBuildError(stage, e) from e

        return FourPillarsChart(
            year=year,
            month=month,
            day=day,
            hour=hour,
            gender=gender,
            birth=instant,
            late_zi_applied=late_zi_policy is LateZiPolicy.NEXT_DAY and self.is_late_zi(instant),
            late_zi_policy=late_zi_policy,
            solar_time=solar_time,
            civil=birth,
            location=loc,
        )

    def build_chart_from_config(self, birth: CivilDateTime, loc: GeoLocation, gender: Gender, config) -> FourPillarsChart:
        return self.build_chart(
            birth, loc, gender,
            late_zi_policy=LateZiPolicy(config.late_zi_policy),
            solar_time=SolarTimeMode(config.solar_time),
        )

    def element_tally(self, chart: FourPillarsChart) -> ElementTally:
        visible = {e: 0 for e in Element}
        hidden = {e: 0.0 for e in Element}
        for pillar in chart.pillars:
            visible[pillar.stem.element] += 1
            visible[pillar.branch.element] += 1
            hidden[pillar.stem.element] += 1.0
            for stem, weight in pillar.branch.hidden_stems:
                hidden[stem.element] += weight
        return ElementTally(visible, hidden)


chart_builder = ChartBuilder()


# ==================== Serialization ====================

def _stem_dict(stem: Stem) -> Dict[str, Any]:
    return {
        "index": stem.index,
        "glyph": stem.glyph,
        "pinyin": stem.pinyin,
        "element": stem.element.label,
        "polarity": stem.polarity.value,
    }


def _pillar_dict(pillar: Pillar) -> Dict[str, Any]:
    branch = pillar.branch
    return {
        "sexagenary_index": pillar.sexagenary_index,
        "glyphs": pillar.glyphs,
        "stem": _stem_dict(pillar.stem),
        "branch": {
            "index": branch.index,
            "glyph": branch.glyph,
            "pinyin": branch.pinyin,
            "element": branch.element.label,
            "polarity": branch.polarity.value,
            "hidden_stems": [{"glyph": s.glyph, "weight": w} for s, w in branch.hidden_stems],
        },
    }


def chart_to_dict(chart: FourPillarsChart) -> Dict[str, Any]:
    """Versioned JSON-ready form of a chart, including the convention echo."""
    tally = chart_builder.element_tally(chart)
    data: Dict[str, Any] = {
        "format": CHART_FORMAT_VERSION,
        "pillars": {pos: _pillar_dict(chart.pillar_at(pos)) for pos in POSITIONS},
        "day_master": _stem_dict(chart.day_master),
        "gender": chart.gender.value,
        "late_zi_applied": chart.late_zi_applied,
        "config": {
            "late_zi_policy": chart.late_zi_policy.value,
            "solar_time": chart.solar_time.value,
        },
        "element_tally": {
            "visible": {e.label: tally.visible[e] for e in Element},
            "hidden_weighted": {e.label: round(tally.hidden_weighted[e], 6) for e in Element},
        },
    }
    if chart.civil is not None:
        data["civil_birth"] = {
            "iso_local": chart.civil.isoformat(),
            "utc_offset_minutes": chart.civil.utc_offset_minutes,
        }
    if chart.location is not None:
        data["location"] = {
            "lon": chart.location.longitude_deg_east,
            "lat": chart.location.latitude_deg_north,
        }
    if chart.birth is not None:
        data["birth"] = {
            "jd_utc": round(chart.birth.jd_utc, 6),
            "local_true_solar": chart.birth.local_true_solar.isoformat(),
        }
    return data


def chart_to_json(chart: FourPillarsChart) -> str:
    return json.dumps(chart_to_dict(chart), ensure_ascii=False, indent=2)
