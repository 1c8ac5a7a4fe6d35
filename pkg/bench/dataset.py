"""
Benchmark dataset: schema, loading, validation statistics and import of the
raw release format.

The on-disk schema is one JSON document:

    {"persons": [{"person_id": "P001",
                  "birth": {"iso_local": "1966-10-18T23:15", "utc_offset_minutes": 480},
                  "gender": "f",
                  "place": {"name": "Hong Kong", "lon": 114.17, "lat": 22.3},
                  "country": "China",
                  "questions": [{"question_id": "P001-Q01", "text": "...",
                                 "choices": ["...", "..."], "gold_index": 2,
                                 "dimension": "Career", "period_year": 1990}]}]}

``period_year`` is optional.
"""

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from bazi.calendrics import CivilDateTime, GeoLocation, check_civil_window
from bazi.chart import Gender
from bazi.persona import ScenarioDomain
from errors import BaziError, DatasetError

logger = structlog.get_logger(__name__)

DATASET_FORMAT = "celebrity-dataset/v1"


# ==================== Schema ====================

class BirthModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    iso_local: str = Field(..., description="local wall time, YYYY-MM-DDTHH:MM")
    utc_offset_minutes: int = Field(..., ge=-840, le=840)

    @field_validator("iso_local")
    @classmethod
    def check_iso_local(cls, v: str) -> str:
        try:
            parsed = datetime.fromisoformat(v)
        except ValueError:
            raise ValueError("expected YYYY-MM-DDTHH:MM") from None
        if parsed.tzinfo is not None:
            raise ValueError("must be a local wall time without offset")
        return v


class PlaceModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    lon: float = Field(..., ge=-180.0, le=180.0)
    lat: float = Field(0.0, ge=-90.0, le=90.0)


class QuestionModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    question_id: str = Field(..., min_length=1)
    text: str = Field(..., min_length=1)
    choices: List[str] = Field(..., min_length=2, max_length=8)
    gold_index: int = Field(..., ge=0)
    dimension: str
    period_year: Optional[int] = Field(None, ge=1900, le=2100)

    @field_validator("dimension")
    @classmethod
    def check_dimension(cls, v: str) -> str:
        try:
            return ScenarioDomain.parse(v).value
        except BaziError as e:
            raise ValueError(str(e)) from None

    @model_validator(mode="after")
    def check_gold(self) -> "QuestionModel":
        if self.gold_index >= len(self.choices):
            raise ValueError(f"gold_index {self.gold_index} out of range for {len(self.choices)} choices")
        return self


class PersonModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    person_id: str = Field(..., min_length=1)
    birth: BirthModel
    gender: str
    place: PlaceModel
    country: str = Field(..., min_length=1)
    questions: List[QuestionModel] = Field(..., min_length=1)

    @field_validator("gender")
    @classmethod
    def check_gender(cls, v: str) -> str:
        try:
            return Gender.parse(v).value
        except BaziError as e:
            raise ValueError(str(e)) from None

    @model_validator(mode="after")
    def check_birth_window(self) -> "PersonModel":
        try:
            check_civil_window(_civil(self.birth))
        except BaziError as e:
            raise ValueError(f"birth: {e}") from None
        seen = Counter(q.question_id for q in self.questions)
        dupes = sorted(qid for qid, n in seen.items() if n > 1)
        if dupes:
            raise ValueError(f"duplicate question_id {', '.join(dupes)}")
        return self


class DatasetModel(BaseModel):
    model_config = ConfigDict(extra="allow")

    persons: List[PersonModel]

    @model_validator(mode="after")
    def check_unique_ids(self) -> "DatasetModel":
        seen = Counter(p.person_id for p in self.persons)
        dupes = sorted(pid for pid, n in seen.items() if n > 1)
        if dupes:
            raise ValueError(f"duplicate person_id {', '.join(dupes)}")
        return self


def _civil(birth: BirthModel) -> CivilDateTime:
    return CivilDateTime.from_datetime(datetime.fromisoformat(birth.iso_local), birth.utc_offset_minutes)


# ==================== Records ====================

@dataclass(frozen=True)
class Place:
    name: str
    location: GeoLocation
    utc_offset_minutes: int


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    choices: Tuple[str, ...]
    gold_index: int
    dimension: ScenarioDomain
    period_year: Optional[int] = None


@dataclass(frozen=True)
class PersonRecord:
    person_id: str
    birth: CivilDateTime
    gender: Gender
    place: Place
    country: str
    questions: Tuple[Question, ...]


@dataclass
class ValidationReport:
    persons: int = 0
    countries: int = 0
    questions: int = 0
    male: int = 0
    female: int = 0
    per_country: Dict[str, Dict[str, int]] = field(default_factory=dict)
    per_dimension: Dict[str, int] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def avg_questions_per_person(self) -> float:
        return self.questions / self.persons if self.persons else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "persons": self.persons,
            "countries": self.countries,
            "questions": self.questions,
            "male": self.male,
            "female": self.female,
            "avg_questions_per_person": round(self.avg_questions_per_person, 2),
            "per_country": self.per_country,
            "per_dimension": self.per_dimension,
            "warnings": self.warnings,
        }


def _record(model: PersonModel) -> PersonRecord:
    civil = _civil(model.birth)
    return PersonRecord(
        person_id=model.person_id,
        birth=civil,
        gender=Gender.parse(model.gender),
        place=Place(model.place.name, GeoLocation(model.place.lon, model.place.lat), civil.utc_offset_minutes),
        country=model.country,
        questions=tuple(
            Question(q.question_id, q.text, tuple(q.choices), q.gold_index,
                     ScenarioDomain.parse(q.dimension), q.period_year)
            for q in model.questions
        ),
    )


def _issue_path(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


# ==================== Validation ====================

# Two or more capitalised words in a row that do not open a sentence.
_NAME_RUN = re.compile(r"(?<![.!?]\s)(?<!^)\b([A-Z][a-z]+(?:\s+[A-Z][a-z]+)+)")


def proper_name_candidates(text: str) -> List[str]:
    return [m.group(1) for m in _NAME_RUN.finditer(text.strip())]


def build_report(records: List[PersonRecord]) -> ValidationReport:
    report = ValidationReport()
    countries: Dict[str, Dict[str, int]] = {}
    dimensions: Counter = Counter()
    for person in records:
        report.persons += 1
        report.questions += len(person.questions)
        if person.gender is Gender.MALE:
            report.male += 1
        else:
            report.female += 1
        stats = countries.setdefault(person.country, {"persons": 0, "questions": 0})
        stats["persons"] += 1
        stats["questions"] += len(person.questions)
        for q in person.questions:
            dimensions[q.dimension.value] += 1
            names = proper_name_candidates(q.text)
            if names:
                report.warnings.append(
                    f"persons.{person.person_id}.questions.{q.question_id}: possible proper name {', '.join(names)}"
                )
    report.countries = len(countries)
    report.per_country = {name: countries[name] for name in sorted(countries)}
    report.per_dimension = {d.value: dimensions.get(d.value, 0) for d in ScenarioDomain}
    return report


def parse_dataset(data: Any) -> Tuple[List[PersonRecord], ValidationReport]:
    try:
        model = DatasetModel.model_validate(data)
    except ValidationError as e:
        issues = [f"{_issue_path(err['loc'])}: {err['msg']}" for err in e.errors()]
        raise DatasetError(f"dataset has {len(issues)} schema violation(s)", issues) from None
    records = [_record(p) for p in model.persons]
    report = build_report(records)
    for warning in report.warnings:
        logger.info("dataset_warning", warning=warning)
    return records, report


def load_dataset(path: str) -> Tuple[List[PersonRecord], ValidationReport]:
    """Parse and validate a dataset file; schema violations raise DatasetError with record paths."""
    target = Path(path)
    try:
        data = json.loads(target.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DatasetError(f"dataset not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DatasetError(f"dataset {path} is not valid JSON", [f"line {e.lineno} column {e.colno}: {e.msg}"]) from None
    records, report = parse_dataset(data)
    logger.info("dataset_loaded", path=str(target), persons=report.persons, questions=report.questions)
    return records, report


def dataset_to_dict(records: List[PersonRecord]) -> Dict[str, Any]:
    return {
        "format": DATASET_FORMAT,
        "persons": [
            {
                "person_id": p.person_id,
                "birth": {"iso_local": p.birth.isoformat(), "utc_offset_minutes": p.birth.utc_offset_minutes},
                "gender": p.gender.value,
                "place": {"name": p.place.name, "lon": p.place.location.longitude_deg_east,
                          "lat": p.place.location.latitude_deg_north},
                "country": p.country,
                "questions": [
                    {
                        "question_id": q.question_id,
                        "text": q.text,
                        "choices": list(q.choices),
                        "gold_index": q.gold_index,
                        "dimension": q.dimension.value,
                        **({"period_year": q.period_year} if q.period_year is not None else {}),
                    }
                    for q in p.questions
                ],
            }
            for p in records
        ],
    }


# ==================== Raw release import ====================

_RAW_TIME_FORMATS = ("%Y/%m/%d, %I:%M %p", "%Y/%m/%d %I:%M %p", "%Y/%m/%d, %H:%M", "%Y/%m/%d %H:%M")
_LETTER_PREFIX = re.compile(r"^\s*([A-H])\s*[.)．、:]\s*")


def parse_raw_birth_time(text: str) -> datetime:
    """'1966/10/18, 11:15 PM' -> datetime(1966, 10, 18, 23, 15)."""
    cleaned = " ".join(str(text).split())
    for fmt in _RAW_TIME_FORMATS:
        try:
            return datetime.strptime(cleaned, fmt)
        except ValueError:
            continue
    raise ValueError(f"unrecognised birth time {text!r}")


def _raw_choices(options: Any) -> Tuple[List[str], List[str]]:
    """Choice texts and their letters from a dict {"A": ...} or a list ["A. ...", ...]."""
    if isinstance(options, dict):
        letters = sorted(options)
        return [str(options[k]).strip() for k in letters], [k.strip().upper() for k in letters]
    texts, letters = [], []
    for i, option in enumerate(options):
        match = _LETTER_PREFIX.match(str(option))
        letters.append(match.group(1) if match else chr(ord("A") + i))
        texts.append(_LETTER_PREFIX.sub("", str(option)).strip())
    return texts, letters


def import_raw(raw: Any, places: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    """
    Convert the raw release format into the documented schema.

    Person names are dropped; persons get sequential ids in file order.
    Problems are collected and raised together as one DatasetError.
    """
    people = raw.get("persons", raw.get("data")) if isinstance(raw, dict) else raw
    if not isinstance(people, list):
        raise DatasetError("raw dataset must be a list of persons or an object with a 'persons' list")

    issues: List[str] = []
    persons: List[Dict[str, Any]] = []
    for i, person in enumerate(people):
        path = f"persons.{i}"
        person_id = f"P{i + 1:03d}"
        try:
            born = parse_raw_birth_time(person["birth_time"])
        except (KeyError, ValueError) as e:
            issues.append(f"{path}.birth_time: {e}")
            continue
        place_name = str(person.get("birthplace", "")).strip()
        place = places.get(place_name)
        if place is None:
            issues.append(f"{path}.birthplace: no entry for {place_name!r} in the places table")
            continue

        questions = []
        for j, q in enumerate(person.get("questions", [])):
            qpath = f"{path}.questions.{j}"
            texts, letters = _raw_choices(q.get("options", []))
            answer = str(q.get("answer", "")).strip().upper()[:1]
            if answer not in letters:
                issues.append(f"{qpath}.answer: {answer!r} is not one of {letters}")
                continue
            entry = {
                "question_id": f"{person_id}-Q{j + 1:02d}",
                "text": str(q.get("question", q.get("text", ""))).strip(),
                "choices": texts,
                "gold_index": letters.index(answer),
                "dimension": q.get("dimension", q.get("category", "")),
            }
            if q.get("period_year") is not None:
                entry["period_year"] = int(q["period_year"])
            questions.append(entry)

        persons.append({
            "person_id": person_id,
            "birth": {"iso_local": born.strftime("%Y-%m-%dT%H:%M"),
                      "utc_offset_minutes": int(place["utc_offset_minutes"])},
            "gender": person.get("gender", ""),
            "place": {"name": place_name, "lon": float(place["lon"]), "lat": float(place.get("lat", 0.0))},
            "country": person.get("country", ""),
            "questions": questions,
        })

    if issues:
        raise DatasetError(f"raw import found {len(issues)} problem(s)", issues)
    converted = {"format": DATASET_FORMAT, "persons": persons}
    parse_dataset(converted)
    return converted
