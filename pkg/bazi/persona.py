"""
Persona prompt generation.

Folds a chart, its analysis and its temporal cycles into a deterministic
English prompt: long-term traits from the pattern, element balance and
ShenSha, plus a per-domain reading of the luck and flowing pillars active in
the question's period. Rendering is byte-stable for a given template version.
"""

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import structlog

from bazi.analysis import (
    AnalysisBundle,
    PatternKind,
    relation_of,
    ten_god,
)
from bazi.calendrics import MAX_CIVIL_YEAR, MIN_CIVIL_YEAR
from bazi.chart import DATA_DIR, POSITIONS, Element, FourPillarsChart, Pillar
from bazi.cycles import CyclesReport, Interaction, LuckPillar, cycle_engine
from errors import ConfigurationError, InputValidationError, OutOfWindowError

logger = structlog.get_logger(__name__)


class ScenarioDomain(Enum):
    WEALTH = "Wealth"
    HEALTH = "Health"
    KINSHIP = "Kinship"
    CAREER = "Career"
    RELATIONSHIP = "Relationship"

    @classmethod
    def parse(cls, text: str) -> "ScenarioDomain":
        lowered = str(text).strip().lower()
        for domain in cls:
            if lowered in (domain.value.lower(), domain.value.lower() + "s"):
                return domain
        raise InputValidationError(
            f"unknown dimension {text!r}; expected one of {', '.join(d.value for d in cls)}",
            field="dimension",
        )


DOMAIN_ORDER = (
    ScenarioDomain.HEALTH,
    ScenarioDomain.CAREER,
    ScenarioDomain.WEALTH,
    ScenarioDomain.RELATIONSHIP,
    ScenarioDomain.KINSHIP,
)


class Valence(Enum):
    SUPPORTIVE = "Supportive"
    NEUTRAL = "Neutral"
    ADVERSE = "Adverse"

    def downgraded(self) -> "Valence":
        if self is Valence.SUPPORTIVE:
            return Valence.NEUTRAL
        return Valence.ADVERSE


@dataclass(frozen=True)
class TraitDescriptor:
    source_kind: str      # pattern | element_excess | element_deficit | shensha
    source: str
    tag: str
    weight: float


@dataclass(frozen=True)
class TimeWindow:
    start_year: int
    end_year: int

    def __post_init__(self):
        if self.end_year < self.start_year:
            raise InputValidationError("window end precedes its start", field="window")
        if self.start_year < MIN_CIVIL_YEAR or self.end_year > MAX_CIVIL_YEAR:
            raise OutOfWindowError(
                f"window {self.start_year}-{self.end_year} is outside {MIN_CIVIL_YEAR}-{MAX_CIVIL_YEAR}",
                field="window",
            )

    def contains(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year

    def label(self) -> str:
        if self.start_year == self.end_year:
            return str(self.start_year)
        return f"{self.start_year}-{self.end_year}"


@dataclass(frozen=True)
class Driver:
    source: str           # luck | flowing_year | flowing_month | flowing_day
    symbol: str           # glyph of the stem or branch
    element: Element
    hit: str              # favorable | unfavorable | neutral
    weight: float


@dataclass(frozen=True)
class TemporalState:
    domain: ScenarioDomain
    window: TimeWindow
    drivers: Tuple[Driver, ...]
    clashes: Tuple[Interaction, ...]
    valence: Valence


@dataclass(frozen=True)
class PersonaPrompt:
    sections: Tuple[Tuple[str, str], ...]
    rendered_text: str
    content_hash: str
    template_version: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "template_version": self.template_version,
            "content_hash": self.content_hash,
            "sections": [{"title": title, "text": text} for title, text in self.sections],
            "rendered_text": self.rendered_text,
        }


@dataclass(frozen=True)
class QuestionContext:
    text: str
    choices: Tuple[str, ...]


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ==================== Templates ====================

@dataclass(frozen=True)
class PromptTemplate:
    version: str
    system_text: str
    titles: Dict[str, str]
    question_heading: str
    answer_instruction: str


SECTION_KEYS = ("chart", "rules", "reasoning", "scenarios")

TEMPLATES: Dict[str, PromptTemplate] = {
    "v1": PromptTemplate(
        version="v1",
        system_text=(
            "You are an expert BaZi (Four Pillars of Destiny) analyst. You read a person's "
            "chart and its interpretation, then answer a multiple-choice question about "
            "that person's life. Answer with the letter of the single best choice."
        ),
        titles={
            "chart": "BaZi chart",
            "rules": "BaZi rule analysis",
            "reasoning": "BaZi reasoning",
            "scenarios": "Scenario interpretation",
        },
        question_heading="Question",
        answer_instruction="Reply with the letter of the best choice on the first line, then a short justification.",
    ),
}


def get_template(version: str) -> PromptTemplate:
    template = TEMPLATES.get(version)
    if template is None:
        raise ConfigurationError(
            f"unknown template version {version!r}; available: {', '.join(sorted(TEMPLATES))}"
        )
    return template


def choice_letter(index: int) -> str:
    return chr(ord("A") + index)


# ==================== Formatting helpers ====================

def _element(e: Element) -> str:
    return f"{e.label} ({e.glyph})"


def _pillar(p: Pillar) -> str:
    return f"{p.pinyin} ({p.glyphs})"


def _elements(values) -> str:
    ordered = sorted(values, key=lambda e: e.value)
    return ", ".join(_element(e) for e in ordered) if ordered else "none"


def _num(x: float) -> str:
    text = f"{x:+.2f}"
    return "+0.00" if text == "-0.00" else text


# ==================== Persona builder ====================

class PersonaBuilder:
    """Trait mapping, scenario states and prompt rendering."""

    VALENCE_EPSILON = 1e-9

    def __init__(
        self,
        lexicon_path: Optional[str] = None,
        domain_map_path: Optional[str] = None,
        rule_knowledge_path: Optional[str] = None,
        three_harmony: bool = False,
    ):
        self.three_harmony = three_harmony
        self.lexicon = _read_json(lexicon_path, "trait_lexicon.json")
        self.domain_map = _read_json(domain_map_path, "domain_map.json")
        self._rule_knowledge_path = rule_knowledge_path
        self._validate_assets()
        self._tag_order = {tag: i for i, tag in enumerate(self.lexicon["tags"])}

    @classmethod
    def from_config(cls, config) -> "PersonaBuilder":
        return cls(config.trait_lexicon_path, config.domain_map_path, config.rule_knowledge_path,
                   config.three_harmony)

    def _validate_assets(self) -> None:
        tags = set(self.lexicon.get("tags", []))
        for section in ("patterns", "element_excess", "element_deficit", "shensha"):
            for key, values in self.lexicon.get(section, {}).items():
                unknown = [t for t in values if t not in tags]
                if unknown:
                    raise ConfigurationError(f"trait lexicon {section}.{key} uses unknown tags {unknown}")
        domains = self.domain_map.get("domains", {})
        for domain in ScenarioDomain:
            entry = domains.get(domain.value)
            if entry is None:
                raise ConfigurationError(f"domain map lacks {domain.value}")
            if entry.get("key_pillar") not in POSITIONS:
                raise ConfigurationError(f"domain map {domain.value}: key_pillar must be one of {POSITIONS}")

    @property
    def lexicon_version(self) -> str:
        return self.lexicon["version"]

    @property
    def domain_map_version(self) -> str:
        return self.domain_map["version"]

    def rule_knowledge(self) -> str:
        path = Path(self._rule_knowledge_path) if self._rule_knowledge_path else DATA_DIR / "rule_knowledge_v1.md"
        try:
            return path.read_text(encoding="utf-8").strip()
        except FileNotFoundError:
            raise ConfigurationError(f"rule knowledge document not found: {path}") from None

    # ==================== Traits ====================

    def personality_features(self, bundle: AnalysisBundle) -> List[TraitDescriptor]:
        weights = self.lexicon["weights"]
        found: Dict[str, TraitDescriptor] = {}

        def add(kind: str, source: str, tags: Sequence[str], weight: float):
            for tag in tags:
                current = found.get(tag)
                if current is None or weight > current.weight:
                    found[tag] = TraitDescriptor(kind, source, tag, weight)

        pattern_name = bundle.pattern.glyph_name
        add("pattern", pattern_name, self.lexicon["patterns"].get(pattern_name, []), weights["pattern"])

        tally = bundle.tally
        dominant, deficient = tally.dominant(), tally.deficient()
        if set(dominant) != set(deficient):
            for e in dominant:
                add("element_excess", e.label, self.lexicon["element_excess"].get(e.label, []), weights["element"])
            for e in deficient:
                add("element_deficit", e.label, self.lexicon["element_deficit"].get(e.label, []), weights["element"])

        for mark in bundle.shensha:
            add("shensha", mark.name, self.lexicon["shensha"].get(mark.rule_id, []), weights["shensha"])

        return sorted(found.values(), key=lambda t: (-t.weight, self._tag_order[t.tag]))

    # ==================== Scenario states ====================

    def window_for(self, chart: FourPillarsChart, period_year: Optional[int], reference_age: int) -> TimeWindow:
        if period_year is not None:
            return TimeWindow(period_year, period_year)
        birth_year = chart.civil.year if chart.civil is not None else chart.birth.local_true_solar.year
        year = min(max(birth_year + reference_age, MIN_CIVIL_YEAR), MAX_CIVIL_YEAR)
        return TimeWindow(year, year)

    def active_luck_pillars(self, luck: Sequence[LuckPillar], window: TimeWindow) -> List[LuckPillar]:
        active = []
        for i, lp in enumerate(luck):
            end = luck[i + 1].start_civil_year - 1 if i + 1 < len(luck) else lp.start_civil_year + 9
            if lp.start_civil_year <= window.end_year and end >= window.start_year:
                active.append(lp)
        return active

    def _driver(self, source: str, symbol: str, element: Element, bundle: AnalysisBundle) -> Driver:
        weight = float(self.domain_map["driver_weights"][source])
        if element in bundle.preference.favorable:
            hit = "favorable"
        elif element in bundle.preference.unfavorable:
            hit = "unfavorable"
        else:
            hit = "neutral"
        return Driver(source, symbol, element, hit, weight)

    def scenario_state(
        self,
        bundle: AnalysisBundle,
        cycles_output: CyclesReport,
        domain: ScenarioDomain,
        window: TimeWindow,
    ) -> TemporalState:
        chart = bundle.chart
        drivers: List[Driver] = []
        flowing_pillars: List[Pillar] = []

        for lp in self.active_luck_pillars(cycles_output.luck_pillars, window):
            drivers.append(self._driver("luck", lp.pillar.stem.glyph, lp.pillar.stem.element, bundle))
            drivers.append(self._driver("luck", lp.pillar.branch.glyph, lp.pillar.branch.element, bundle))

        for flowing in cycles_output.flowing:
            if not window.contains(flowing.period_start.year):
                continue
            source = "flowing_" + flowing.granularity.value.lower()
            drivers.append(self._driver(source, flowing.pillar.stem.glyph, flowing.pillar.stem.element, bundle))
            drivers.append(self._driver(source, flowing.pillar.branch.glyph, flowing.pillar.branch.element, bundle))
            flowing_pillars.append(flowing.pillar)

        key_pillar = self.domain_map["domains"][domain.value]["key_pillar"]
        clashes = tuple(
            i for p in flowing_pillars for i in cycle_engine.pillar_interactions(chart, p)
            if i.kind == "clash" and i.natal_position == key_pillar
        )
        return TemporalState(domain, window, tuple(drivers), clashes, self.valence(drivers, bool(clashes)))

    def valence(self, drivers: Sequence[Driver], key_clash: bool) -> Valence:
        favorable = sum(d.weight for d in drivers if d.hit == "favorable")
        unfavorable = sum(d.weight for d in drivers if d.hit == "unfavorable")
        if favorable > unfavorable + self.VALENCE_EPSILON:
            result = Valence.SUPPORTIVE
        elif unfavorable > favorable + self.VALENCE_EPSILON:
            result = Valence.ADVERSE
        else:
            result = Valence.NEUTRAL
        return result.downgraded() if key_clash else result

    # ==================== Rendering ====================

    def _chart_section(self, chart: FourPillarsChart, bundle: AnalysisBundle) -> str:
        lines = [f"Gender: {chart.gender.value}"]
        for position in POSITIONS:
            p = chart.pillar_at(position)
            hidden = ", ".join(f"{s.pinyin} ({s.glyph}) {w:.1f}" for s, w in p.branch.hidden_stems)
            lines.append(
                f"{position.capitalize()} pillar: {_pillar(p)}; stem {p.stem.polarity.value} {_element(p.stem.element)}, "
                f"branch {p.branch.polarity.value} {_element(p.branch.element)}; hidden stems {hidden}"
            )
        dm = chart.day_master
        lines.append(f"Day master: {dm.pinyin} ({dm.glyph}), {dm.polarity.value} {_element(dm.element)}")
        counts = ", ".join(f"{_element(e)} {bundle.tally.visible[e]}" for e in Element)
        weighted = ", ".join(f"{_element(e)} {bundle.tally.hidden_weighted[e]:.1f}" for e in Element)
        lines.append(f"Visible element count: {counts}")
        lines.append(f"Element count with hidden stems: {weighted}")
        return "\n".join(lines)

    def _rules_section(self, bundle: AnalysisBundle) -> str:
        lines = ["Ten Gods relative to the day master:"]
        for position in POSITIONS:
            stem_god = bundle.stem_gods[position]
            stem_text = "self" if stem_god is None else f"{stem_god.english} ({stem_god.glyph})"
            branch_god = bundle.branch_gods[position]
            lines.append(
                f"- {position} stem: {stem_text}; {position} branch: {branch_god.english} ({branch_god.glyph})"
            )
        if bundle.shensha:
            lines.append("ShenSha: " + "; ".join(m.describe() for m in bundle.shensha))
        else:
            lines.append("ShenSha: none")
        s = bundle.strength
        parts = ", ".join(f"{k.replace('_', ' ')} {_num(v)}" for k, v in s.contributions.items())
        lines.append(f"Day master strength: {s.category.value} (score {_num(s.score)}; {parts})")
        lines.append(f"Pattern: {bundle.pattern.english_name} ({bundle.pattern.glyph_name})")
        lines.append(f"Favorable elements: {_elements(bundle.preference.favorable)}")
        lines.append(f"Unfavorable elements: {_elements(bundle.preference.unfavorable)}")
        return "\n".join(lines)

    def _reasoning_section(self, bundle: AnalysisBundle, traits: Sequence[TraitDescriptor]) -> str:
        lines = ["Pattern basis: " + "; ".join(bundle.pattern.basis)]
        if bundle.pattern.kind is PatternKind.FOLLOWER:
            lines.append("The day master is too weak to stand alone and follows the dominant force.")
        if traits:
            lines.append("Long-term traits:")
            for t in traits:
                lines.append(f"- {t.tag} (from {t.source_kind.replace('_', ' ')} {t.source}, weight {t.weight:.1f})")
        else:
            lines.append("Long-term traits: none")
        return "\n".join(lines)

    def _domain_stars(self, bundle: AnalysisBundle, domain: ScenarioDomain) -> str:
        relations = self.domain_map["domains"][domain.value]["relations"]
        dm = bundle.chart.day_master
        hits = []
        for position in POSITIONS:
            pillar = bundle.chart.pillar_at(position)
            candidates = [] if position == "day" else [("stem", pillar.stem)]
            candidates.append(("branch", pillar.branch.principal_stem))
            for kind, stem in candidates:
                if relation_of(dm, stem).name.lower() in relations:
                    god = ten_god(dm, stem)
                    hits.append(f"{god.english} ({god.glyph}) in {position} {kind}")
        return "; ".join(hits) if hits else "none"

    def _scenario_section(self, bundle: AnalysisBundle, cycles_output: CyclesReport,
                          domains: Sequence[ScenarioDomain], window: TimeWindow) -> str:
        lines = [f"Luck direction: {cycles_output.direction.value}"]
        luck = ", ".join(
            f"{_pillar(lp.pillar)} from {lp.start_civil_year} (age {lp.start_age_years:.1f})"
            for lp in cycles_output.luck_pillars
        )
        lines.append(f"Luck pillars: {luck}")
        lines.append(f"Period under consideration: {window.label()}")
        active = self.active_luck_pillars(cycles_output.luck_pillars, window)
        lines.append("Active luck pillar: " + (", ".join(_pillar(lp.pillar) for lp in active) or "none"))
        for flowing in cycles_output.flowing:
            if window.contains(flowing.period_start.year):
                interactions = cycle_engine.pillar_interactions(bundle.chart, flowing.pillar, self.three_harmony)
                detail = "; ".join(i.describe() for i in interactions) or "no interactions"
                lines.append(
                    f"Flowing {flowing.granularity.value.lower()} from {flowing.period_start.isoformat()}: "
                    f"{_pillar(flowing.pillar)} ({detail})"
                )
        for domain in sorted(domains, key=DOMAIN_ORDER.index):
            state = self.scenario_state(bundle, cycles_output, domain, window)
            entry = self.domain_map["domains"][domain.value]
            fav = sum(d.weight for d in state.drivers if d.hit == "favorable")
            unfav = sum(d.weight for d in state.drivers if d.hit == "unfavorable")
            lines.append(f"{domain.value} ({entry['focus']}):")
            lines.append(f"- natal stars: {self._domain_stars(bundle, domain)}")
            lines.append(f"- favorable weight {fav:.2f}, unfavorable weight {unfav:.2f}")
            if state.clashes:
                lines.append(f"- clash on the {entry['key_pillar']} pillar: "
                             + "; ".join(i.describe() for i in state.clashes))
            lines.append(f"- outlook: {state.valence.value}")
        return "\n".join(lines)

    def render_prompt(
        self,
        chart: FourPillarsChart,
        bundle: AnalysisBundle,
        cycles_output: CyclesReport,
        domains: Sequence[ScenarioDomain],
        question_context: Optional[QuestionContext] = None,
        template_version: str = "v1",
        window: Optional[TimeWindow] = None,
        include: Sequence[str] = SECTION_KEYS,
        extra_sections: Sequence[Tuple[str, str]] = (),
    ) -> PersonaPrompt:
        """
        Render the persona prompt.

        ``include`` selects which of the four pipeline sections appear;
        ``extra_sections`` are appended after them and before the question.
        """
        template = get_template(template_version)
        unknown = [key for key in include if key not in SECTION_KEYS]
        if unknown:
            raise ConfigurationError(f"unknown prompt sections {unknown}")
        if window is None:
            window = self.window_for(chart, None, 30)

        builders = {
            "chart": lambda: self._chart_section(chart, bundle),
            "rules": lambda: self._rules_section(bundle),
            "reasoning": lambda: self._reasoning_section(bundle, self.personality_features(bundle)),
            "scenarios": lambda: self._scenario_section(bundle, cycles_output, domains, window),
        }
        sections = [(template.titles[key], builders[key]()) for key in SECTION_KEYS if key in include]
        sections.extend(extra_sections)

        if question_context is not None:
            if not 2 <= len(question_context.choices) <= 8:
                raise InputValidationError("a question needs between 2 and 8 choices", field="choices")
            body = [question_context.text]
            body.extend(f"{choice_letter(i)}. {choice}" for i, choice in enumerate(question_context.choices))
            body.append(template.answer_instruction)
            sections.append((template.question_heading, "\n".join(body)))

        rendered = "\n\n".join(f"## {title}\n{text}" for title, text in sections) + "\n"
        return PersonaPrompt(tuple(sections), rendered, content_hash(rendered), template.version)


def _read_json(path: Optional[str], bundled_name: str) -> Dict[str, Any]:
    target = Path(path) if path else DATA_DIR / bundled_name
    try:
        return json.loads(target.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"asset not found: {target}") from None
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"asset {target} is not valid JSON: {e}") from None


persona_builder = PersonaBuilder()
