import json
import random
from pathlib import Path

import pytest
import structlog

from bazi.calendrics import CivilDateTime, GeoLocation
from bazi.chart import Gender, chart_builder
from config import GlobalConfig

FIXTURES = Path(__file__).parent / "fixtures"

@pytest.fixture(autouse=True)
def _reset_structlog():
    """CLI tests configure structlog against pytest's per-test stderr; undo it afterwards."""
    yield
    structlog.reset_defaults()


DIMENSIONS = ("Wealth", "Health", "Kinship", "Career", "Relationship")


@pytest.fixture
def config():
    return GlobalConfig()


@pytest.fixture
def sample_dataset_path():
    return str(FIXTURES / "sample.json")


@pytest.fixture
def hong_kong_birth():
    """Birth from the dataset's sample card: 1966/10/18, 11:15 PM, Hong Kong, female."""
    return CivilDateTime(1966, 10, 18, 23, 15, 480), GeoLocation(114.17, 22.3), Gender.FEMALE


@pytest.fixture
def hong_kong_chart(hong_kong_birth):
    return chart_builder.build_chart(*hong_kong_birth)


def synthetic_dataset(persons: int = 50, questions: int = 488, countries: int = 29,
                      males: int = 37, seed: int = 2024) -> dict:
    """Dataset with the published shape: 50 persons, 488 questions, 29 countries, 37 m / 13 f."""
    rng = random.Random(seed)
    base, extra = divmod(questions, persons)
    people = []
    for i in range(persons):
        n_questions = base + (1 if i < extra else 0)
        lon = round(rng.uniform(-170.0, 170.0), 2)
        offset = int(round(lon / 15.0)) * 60
        year = rng.randint(1930, 2000)
        month = rng.randint(1, 12)
        day = rng.randint(1, 28)
        person_id = f"S{i + 1:03d}"
        qs = []
        for j in range(n_questions):
            n_choices = 4
            qs.append({
                "question_id": f"{person_id}-Q{j + 1:02d}",
                "text": f"Which outcome best describes this person's situation, case {j + 1}?",
                "choices": [f"option {k + 1} for case {j + 1}" for k in range(n_choices)],
                "gold_index": rng.randrange(n_choices),
                "dimension": DIMENSIONS[(i + j) % len(DIMENSIONS)],
            })
        people.append({
            "person_id": person_id,
            "birth": {
                "iso_local": f"{year:04d}-{month:02d}-{day:02d}T{rng.randint(0, 23):02d}:{rng.randint(0, 59):02d}",
                "utc_offset_minutes": offset,
            },
            "gender": "m" if i < males else "f",
            "place": {"name": f"Town {i + 1}", "lon": lon, "lat": round(rng.uniform(-60.0, 60.0), 2)},
            "country": f"Country {i % countries + 1:02d}",
            "questions": qs,
        })
    return {"format": "celebrity-dataset/v1", "persons": people}


@pytest.fixture(scope="session")
def synthetic_dataset_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synthetic.json"
    path.write_text(json.dumps(synthetic_dataset(), ensure_ascii=False), encoding="utf-8")
    return str(path)
