"""
Interpretive layer: Ten Gods, ShenSha, day-master strength, pattern
structure and favorable/unfavorable elements.

All weights live in the rule profile and all ShenSha rows in the catalog;
both are versioned JSON assets so alternative schools can be swapped in.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import structlog

from bazi.chart import (
    BRANCH_GLYPHS,
    DATA_DIR,
    POSITIONS,
    Element,
    ElementTally,
    FourPillarsChart,
    Stem,
    chart_builder,
)
from errors import ConfigurationError

logger = structlog.get_logger(__name__)


# ==================== Ten Gods ====================

class Relation(Enum):
    """Element relation of another stem to the day master."""
    SAME = 0        # 比劫
    OUTPUT = 1      # day master generates it (食伤)
    WEALTH = 2      # day master controls it (财)
    OFFICER = 3     # it controls the day master (官杀)
    RESOURCE = 4    # it generates the day master (印)

    def element_for(self, day_master: Element) -> Element:
        return Element((day_master.value + self.value) % 5)


DRAIN_RELATIONS = (Relation.OUTPUT, Relation.WEALTH, Relation.OFFICER)
SUPPORT_RELATIONS = (Relation.SAME, Relation.RESOURCE)


class TenGod(Enum):
    BI_JIAN = ("比肩", "Friend")
    JIE_CAI = ("劫财", "Rob Wealth")
    SHI_SHEN = ("食神", "Eating God")
    SHANG_GUAN = ("伤官", "Hurting Officer")
    PIAN_CAI = ("偏财", "Indirect Wealth")
    ZHENG_CAI = ("正财", "Direct Wealth")
    QI_SHA = ("七杀", "Seven Killings")
    ZHENG_GUAN = ("正官", "Direct Officer")
    PIAN_YIN = ("偏印", "Indirect Resource")
    ZHENG_YIN = ("正印", "Direct Resource")

    @property
    def glyph(self) -> str:
        return self.value[0]

    @property
    def english(self) -> str:
        return self.value[1]

    @property
    def relation(self) -> Relation:
        return _TEN_GOD_RELATION[self]

    @classmethod
    def from_glyph(cls, glyph: str) -> "TenGod":
        for god in cls:
            if god.glyph == glyph:
                return god
        raise KeyError(glyph)


# (relation, same polarity) -> god
_TEN_GOD_GRID = {
    (Relation.SAME, True): TenGod.BI_JIAN,
    (Relation.SAME, False): TenGod.JIE_CAI,
    (Relation.OUTPUT, True): TenGod.SHI_SHEN,
    (Relation.OUTPUT, False): TenGod.SHANG_GUAN,
    (Relation.WEALTH, True): TenGod.PIAN_CAI,
    (Relation.WEALTH, False): TenGod.ZHENG_CAI,
    (Relation.OFFICER, True): TenGod.QI_SHA,
    (Relation.OFFICER, False): TenGod.ZHENG_GUAN,
    (Relation.RESOURCE, True): TenGod.PIAN_YIN,
    (Relation.RESOURCE, False): TenGod.ZHENG_YIN,
}
_TEN_GOD_RELATION = {god: relation for (relation, _), god in _TEN_GOD_GRID.items()}


def relation_of(day_master: Stem, other: Stem) -> Relation:
    return Relation((other.element.value - day_master.element.value) % 5)


def ten_god(day_master: Stem, other: Stem) -> TenGod:
    return _TEN_GOD_GRID[(relation_of(day_master, other), day_master.polarity == other.polarity)]


# ==================== Rule assets ====================

class StrengthCategory(Enum):
    EXTREME_STRONG = "ExtremeStrong"
    STRONG = "Strong"
    BALANCED = "Balanced"
    WEAK = "Weak"
    EXTREME_WEAK = "ExtremeWeak"


@dataclass(frozen=True)
class RuleProfile:
    version: str
    seasonal: Dict[str, float]
    position_factors: Dict[str, float]
    roots: Dict[str, float]
    stem_support: Dict[str, float]
    drains: Dict[str, float]
    balanced_band: float
    extreme: float

    @classmethod
    def load(cls, path: Optional[str] = None) -> "RuleProfile":
        raw = _read_asset(path, "rule_profile.json")
        try:
            profile = cls(
                version=raw["version"],
                seasonal={k: float(v) for k, v in raw["seasonal"].items()},
                position_factors={k: float(raw["position_factors"][k]) for k in POSITIONS},
                roots={k: float(raw["roots"][k]) for k in ("same", "resource")},
                stem_support={k: float(raw["stem_support"][k]) for k in ("same", "resource")},
                drains={k: float(raw["drains"][k]) for k in ("output", "wealth", "officer")},
                balanced_band=float(raw["thresholds"]["balanced_band"]),
                extreme=float(raw["thresholds"]["extreme"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"malformed rule profile {path or 'bundled'}: {e}") from None
        missing = {"prosperous", "prime", "resting", "trapped", "dead"} - set(profile.seasonal)
        if missing:
            raise ConfigurationError(f"rule profile lacks seasonal weights: {sorted(missing)}")
        if not 0 <= profile.balanced_band < profile.extreme:
            raise ConfigurationError("rule profile thresholds must satisfy 0 <= balanced_band < extreme")
        return profile

    def categorize(self, score: float) -> StrengthCategory:
        if score >= self.extreme:
            return StrengthCategory.EXTREME_STRONG
        if score <= -self.extreme:
            return StrengthCategory.EXTREME_WEAK
        if abs(score) <= self.balanced_band:
            return StrengthCategory.BALANCED
        return StrengthCategory.STRONG if score > 0 else StrengthCategory.WEAK


@dataclass(frozen=True)
class ShenShaRule:
    rule_id: str
    name: str
    english: str
    key: str                          # "stem" or "branch"
    key_positions: Tuple[str, ...]
    table: Dict[str, str]             # key glyph -> trigger branch glyphs


@dataclass(frozen=True)
class ShenShaCatalog:
    version: str
    rules: Tuple[ShenShaRule, ...]

    @classmethod
    def load(cls, path: Optional[str] = None) -> "ShenShaCatalog":
        raw = _read_asset(path, "shensha_catalog.json")
        rules = []
        try:
            for row in raw["rules"]:
                rule = ShenShaRule(
                    rule_id=row["id"],
                    name=row["name"],
                    english=row.get("english", row["name"]),
                    key=row["key"],
                    key_positions=tuple(row["key_positions"]),
                    table=dict(row["table"]),
                )
                if rule.key not in ("stem", "branch"):
                    raise ValueError(f"rule {rule.rule_id}: key must be stem or branch")
                if any(p not in POSITIONS for p in rule.key_positions):
                    raise ValueError(f"rule {rule.rule_id}: unknown key position")
                if any(g not in BRANCH_GLYPHS for triggers in rule.table.values() for g in triggers):
                    raise ValueError(f"rule {rule.rule_id}: triggers must be branch glyphs")
                rules.append(rule)
            return cls(raw["version"], tuple(rules))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"malformed ShenSha catalog {path or 'bundled'}: {e}") from None


def _read_asset(path: Optional[str], bundled_name: str) -> Dict[str, Any]:
    target = Path(path) if path else DATA_DIR / bundled_name
    try:
        return json.loads(target.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"asset not found: {target}") from None
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"asset {target} is not valid JSON: {e}") from None


# ==================== Results ====================

@dataclass(frozen=True, order=True)
class ShenShaMark:
    name: str
    location: str      # position of the triggering branch
    rule_id: str
    key_position: str

    def describe(self) -> str:
        return f"{self.name} ({self.location} branch, keyed on {self.key_position})"


@dataclass(frozen=True)
class StrengthAssessment:
    score: float
    category: StrengthCategory
    contributions: Dict[str, float]


class PatternKind(Enum):
    REGULAR = "Regular"
    FOLLOWER = "Follower"
    SPECIAL = "Special"


FOLLOWER_NAMES = {
    Relation.OUTPUT: ("从儿格", "Follow Output"),
    Relation.WEALTH: ("从财格", "Follow Wealth"),
    Relation.OFFICER: ("从杀格", "Follow Officer"),
}
SPECIAL_NAMES = {
    TenGod.BI_JIAN: ("建禄格", "Established Prosperity"),
    TenGod.JIE_CAI: ("月刃格", "Month Blade"),
}


@dataclass(frozen=True)
class PatternStructure:
    kind: PatternKind
    ten_god: Optional[TenGod] = None          # Regular
    follows: Optional[Relation] = None        # Follower
    special_name: Optional[str] = None        # Special
    basis: Tuple[str, ...] = ()

    @property
    def glyph_name(self) -> str:
        if self.kind is PatternKind.REGULAR:
            return f"{self.ten_god.glyph}格"
        if self.kind is PatternKind.FOLLOWER:
            return FOLLOWER_NAMES[self.follows][0]
        return self.special_name

    @property
    def english_name(self) -> str:
        if self.kind is PatternKind.REGULAR:
            return f"{self.ten_god.english} pattern"
        if self.kind is PatternKind.FOLLOWER:
            return FOLLOWER_NAMES[self.follows][1] + " pattern"
        for name, english in SPECIAL_NAMES.values():
            if name == self.special_name:
                return english + " pattern"
        return self.special_name


@dataclass(frozen=True)
class ElementPreference:
    favorable: frozenset
    unfavorable: frozenset

    def __post_init__(self):
        if self.favorable & self.unfavorable:
            raise ValueError("favorable and unfavorable elements overlap")


@dataclass(frozen=True)
class AnalysisBundle:
    chart: FourPillarsChart
    stem_gods: Dict[str, Optional[TenGod]]      # position -> god (None for the day master)
    branch_gods: Dict[str, TenGod]              # position -> god of principal hidden stem
    shensha: Tuple[ShenShaMark, ...]
    strength: StrengthAssessment
    pattern: PatternStructure
    preference: ElementPreference
    tally: ElementTally
    profile_version: str
    catalog_version: str
    hidden_gods: Dict[str, Tuple[Tuple[str, float], ...]] = field(default_factory=dict)


# ==================== Analyzer ====================

class Analyzer:
    """Applies a rule profile and ShenSha catalog to charts."""

    SEASON_KEYS = {
        0: "prosperous",   # month element is the day master's element
        1: "prime",        # month element generates the day master
        4: "resting",      # day master generates the month element
        3: "trapped",      # day master controls the month element
        2: "dead",         # month element controls the day master
    }

    def __init__(self, profile: Optional[RuleProfile] = None, catalog: Optional[ShenShaCatalog] = None):
        self.profile = profile or RuleProfile.load()
        self.catalog = catalog or ShenShaCatalog.load()

    @classmethod
    def from_config(cls, config) -> "Analyzer":
        return cls(RuleProfile.load(config.rule_profile_path), ShenShaCatalog.load(config.shensha_catalog_path))

    # ==================== ShenSha ====================

    def shensha_marks(self, chart: FourPillarsChart) -> List[ShenShaMark]:
        marks = set()
        for rule in self.catalog.rules:
            for key_position in rule.key_positions:
                key_pillar = chart.pillar_at(key_position)
                key_glyph = key_pillar.stem.glyph if rule.key == "stem" else key_pillar.branch.glyph
                triggers = rule.table.get(key_glyph, "")
                for position in POSITIONS:
                    if rule.key == "branch" and position == key_position:
                        continue
                    if chart.pillar_at(position).branch.glyph in triggers:
                        marks.add(ShenShaMark(rule.name, position, rule.rule_id, key_position))
        return sorted(marks, key=lambda m: (POSITIONS.index(m.location), m.rule_id, m.key_position))

    # ==================== Strength ====================

    def day_master_strength(self, chart: FourPillarsChart) -> StrengthAssessment:
        p = self.profile
        dm = chart.day_master
        contributions = {
            "seasonal": 0.0,
            "roots": 0.0,
            "stem_support": 0.0,
            "drain_output": 0.0,
            "drain_wealth": 0.0,
            "drain_officer": 0.0,
        }

        season_offset = (dm.element.value - chart.month.branch.element.value) % 5
        contributions["seasonal"] = p.seasonal[self.SEASON_KEYS[season_offset]]

        for position in POSITIONS:
            factor = p.position_factors[position]
            pillar = chart.pillar_at(position)

            if position != "day":
                self._accumulate(contributions, relation_of(dm, pillar.stem), factor, p.stem_support, "stem_support")

            for stem, weight in pillar.branch.hidden_stems:
                self._accumulate(contributions, relation_of(dm, stem), factor * weight, p.roots, "roots")

        score = sum(contributions.values())
        return StrengthAssessment(score, p.categorize(score), contributions)

    def _accumulate(self, contributions, relation, factor, support_weights, support_key):
        if relation is Relation.SAME:
            contributions[support_key] += support_weights["same"] * factor
        elif relation is Relation.RESOURCE:
            contributions[support_key] += support_weights["resource"] * factor
        else:
            name = relation.name.lower()
            contributions[f"drain_{name}"] -= self.profile.drains[name] * factor

    # ==================== Pattern ====================

    def classify_pattern(self, chart: FourPillarsChart, strength: StrengthAssessment) -> PatternStructure:
        dm = chart.day_master
        basis = [f"strength {strength.category.value} (score {strength.score:.3f})"]

        if strength.category is StrengthCategory.EXTREME_WEAK:
            drains = {r: -strength.contributions[f"drain_{r.name.lower()}"] for r in DRAIN_RELATIONS}
            # first maximum in output, wealth, officer order
            dominant = max(DRAIN_RELATIONS, key=lambda r: drains[r])
            basis.append(
                f"score <= -{self.profile.extreme}; dominant drain {dominant.name.lower()} "
                f"({drains[dominant]:.3f})"
            )
            return PatternStructure(PatternKind.FOLLOWER, follows=dominant, basis=tuple(basis))

        command = chart.month.branch.principal_stem
        god = ten_god(dm, command)
        basis.append(f"month command {command.glyph} is {god.glyph} to day master {dm.glyph}")

        if god in (TenGod.BI_JIAN, TenGod.JIE_CAI):
            fallback = self._strongest_transparent_stem(chart)
            if fallback is None:
                name = SPECIAL_NAMES[god][0]
                basis.append(f"no transparent non-peer stem; special pattern {name}")
                return PatternStructure(PatternKind.SPECIAL, special_name=name, basis=tuple(basis))
            position, fallback_god = fallback
            basis.append(f"peer month command falls back to {position} stem ({fallback_god.glyph})")
            god = fallback_god

        if strength.category is StrengthCategory.BALANCED:
            basis.append("balanced strength: low confidence classification")
        return PatternStructure(PatternKind.REGULAR, ten_god=god, basis=tuple(basis))

    def _strongest_transparent_stem(self, chart: FourPillarsChart) -> Optional[Tuple[str, TenGod]]:
        dm = chart.day_master
        candidates = []
        for position in POSITIONS:
            if position == "day":
                continue
            god = ten_god(dm, chart.pillar_at(position).stem)
            if god not in (TenGod.BI_JIAN, TenGod.JIE_CAI):
                candidates.append((self.profile.position_factors[position], -POSITIONS.index(position), position, god))
        if not candidates:
            return None
        _, _, position, god = max(candidates)
        return position, god

    # ==================== Preference ====================

    def favorable_elements(
        self,
        chart: FourPillarsChart,
        pattern: PatternStructure,
        strength: StrengthAssessment,
    ) -> ElementPreference:
        dm = chart.day_master.element
        drains = {r.element_for(dm) for r in DRAIN_RELATIONS}
        supports = {r.element_for(dm) for r in SUPPORT_RELATIONS}

        if pattern.kind is PatternKind.FOLLOWER:
            followed = pattern.follows.element_for(dm)
            favorable = {followed, followed.generated_by()}
            unfavorable = ({followed.controlled_by()} | {Relation.RESOURCE.element_for(dm)}) - favorable
            return ElementPreference(frozenset(favorable), frozenset(unfavorable))

        if strength.category in (StrengthCategory.STRONG, StrengthCategory.EXTREME_STRONG):
            return ElementPreference(frozenset(drains), frozenset(supports))
        if strength.category in (StrengthCategory.WEAK, StrengthCategory.EXTREME_WEAK):
            return ElementPreference(frozenset(supports), frozenset(drains))

        tally = chart_builder.element_tally(chart)
        least = set(tally.deficient())
        most = set(tally.dominant())
        if least == most:
            return ElementPreference(frozenset(), frozenset())
        return ElementPreference(frozenset(least), frozenset(most))

    # ==================== Bundle ====================

    def analyze(self, chart: FourPillarsChart) -> AnalysisBundle:
        dm = chart.day_master
        strength = self.day_master_strength(chart)
        pattern = self.classify_pattern(chart, strength)
        preference = self.favorable_elements(chart, pattern, strength)
        bundle = AnalysisBundle(
            chart=chart,
            stem_gods={pos: None if pos == "day" else ten_god(dm, chart.pillar_at(pos).stem) for pos in POSITIONS},
            branch_gods={pos: ten_god(dm, chart.pillar_at(pos).branch.principal_stem) for pos in POSITIONS},
            shensha=tuple(self.shensha_marks(chart)),
            strength=strength,
            pattern=pattern,
            preference=preference,
            tally=chart_builder.element_tally(chart),
            profile_version=self.profile.version,
            catalog_version=self.catalog.version,
            hidden_gods={
                pos: tuple((stem.glyph, weight) for stem, weight in chart.pillar_at(pos).branch.hidden_stems)
                for pos in POSITIONS
            },
        )
        logger.debug("chart_analyzed", chart=chart.glyphs, pattern=pattern.glyph_name,
                     strength=strength.category.value)
        return bundle


analyzer = Analyzer()


# ==================== Serialization ====================

def _elements(values) -> List[str]:
    return [e.label for e in sorted(values, key=lambda e: e.value)]


def bundle_to_dict(bundle: AnalysisBundle) -> Dict[str, Any]:
    dm = bundle.chart.day_master
    return {
        "format": "analysis/v1",
        "rule_profile": bundle.profile_version,
        "shensha_catalog": bundle.catalog_version,
        "chart": bundle.chart.glyphs,
        "day_master": {"glyph": dm.glyph, "element": dm.element.label, "polarity": dm.polarity.value},
        "ten_gods": {
            "stems": {pos: (g.glyph if g else "日主") for pos, g in bundle.stem_gods.items()},
            "branches": {pos: g.glyph for pos, g in bundle.branch_gods.items()},
            "hidden_stems": {
                pos: [{"glyph": glyph, "weight": w, "ten_god": ten_god(dm, Stem.from_glyph(glyph)).glyph}
                      for glyph, w in stems]
                for pos, stems in bundle.hidden_gods.items()
            },
        },
        "shensha": [
            {"name": m.name, "location": m.location, "rule_id": m.rule_id, "key_position": m.key_position}
            for m in bundle.shensha
        ],
        "strength": {
            "score": round(bundle.strength.score, 6),
            "category": bundle.strength.category.value,
            "contributions": {k: round(v, 6) for k, v in bundle.strength.contributions.items()},
        },
        "pattern": {
            "kind": bundle.pattern.kind.value,
            "name": bundle.pattern.glyph_name,
            "english": bundle.pattern.english_name,
            "basis": list(bundle.pattern.basis),
        },
        "elements": {
            "favorable": _elements(bundle.preference.favorable),
            "unfavorable": _elements(bundle.preference.unfavorable),
            "visible": {e.label: bundle.tally.visible[e] for e in Element},
            "hidden_weighted": {e.label: round(bundle.tally.hidden_weighted[e], 6) for e in Element},
        },
    }
