"""
Shuffled-birthday control: a seeded derangement over person ids and the
substitution of a donor's birth data.
"""

import random
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Sequence, Tuple

import structlog

from bazi.calendrics import CivilDateTime
from bench.dataset import PersonRecord, Place
from errors import DerangementError

logger = structlog.get_logger(__name__)


class ShuffleMode(Enum):
    BIRTH_AND_PLACE = "birth_and_place"     # donor's full birth datetime, offset and place
    DATE_ONLY = "date_only"                 # donor's calendar date, own clock time and place


@dataclass(frozen=True)
class ShufflePlan:
    seed: int
    permutation: Dict[str, str]         # person_id -> donor person_id
    attempts: int = 1

    def donor_of(self, person_id: str) -> str:
        return self.permutation[person_id]

    def fixed_points(self) -> int:
        return sum(1 for k, v in self.permutation.items() if k == v)

    def to_dict(self) -> Dict[str, object]:
        return {"seed": self.seed, "permutation": dict(sorted(self.permutation.items()))}


def make_shuffle(records: Sequence[PersonRecord], seed: int) -> ShufflePlan:
    """Uniform derangement by rejection: reshuffle until nobody keeps their own birth data."""
    ids = sorted(r.person_id for r in records)
    if len(ids) < 2:
        raise DerangementError(f"a derangement needs at least 2 records, got {len(ids)}")
    rng = random.Random(seed)
    attempts = 0
    while True:
        attempts += 1
        donors = list(ids)
        rng.shuffle(donors)
        if all(a != b for a, b in zip(ids, donors)):
            break
    logger.debug("shuffle_ready", seed=seed, persons=len(ids), attempts=attempts)
    return ShufflePlan(seed, dict(zip(ids, donors)), attempts)


def birth_inputs(
    record: PersonRecord,
    donor: PersonRecord,
    mode: ShuffleMode = ShuffleMode.BIRTH_AND_PLACE,
) -> Tuple[CivilDateTime, Place]:
    """Chart inputs for ``record`` with the donor's data swapped in. Gender always stays."""
    if mode is ShuffleMode.BIRTH_AND_PLACE:
        return donor.birth, donor.place
    own = record.birth
    birth = CivilDateTime(donor.birth.year, donor.birth.month, donor.birth.day,
                          own.hour, own.minute, own.utc_offset_minutes)
    return birth, record.place
