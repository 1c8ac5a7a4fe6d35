"""Pull a multiple-choice letter out of free model text."""

import re
from typing import Optional

import structlog

from errors import InputValidationError

logger = structlog.get_logger(__name__)

MIN_CHOICES = 2
MAX_CHOICES = 8

_ANSWER_PREFIX = re.compile(r"^\s*(?:\*\*)?\s*(?:final\s+)?answer\s*(?:\*\*)?\s*[:：]\s*\(?([A-H])\)?\b", re.IGNORECASE)


def _valid(letter: str, n_choices: int) -> bool:
    return len(letter) == 1 and "A" <= letter <= chr(ord("A") + n_choices - 1)


def extract_choice(text: str, n_choices: int) -> Optional[int]:
    """
    Index of the chosen option, or None when no valid letter is found.

    Tried in order: a line holding only the letter or starting with
    "Answer:"; the first letter followed by "." or ")"; the last standalone
    valid letter anywhere.
    """
    if not MIN_CHOICES <= n_choices <= MAX_CHOICES:
        raise InputValidationError(f"n_choices must be in {MIN_CHOICES}..{MAX_CHOICES}, got {n_choices}", "n_choices")
    text = text or ""

    for line in text.splitlines():
        stripped = line.strip().strip("*").strip()
        bare = stripped.strip("()[]").rstrip(".")
        if _valid(bare, n_choices):
            return ord(bare) - ord("A")
        match = _ANSWER_PREFIX.match(line)
        if match and _valid(match.group(1), n_choices):
            return ord(match.group(1)) - ord("A")

    for match in re.finditer(r"(?<![A-Za-z])([A-H])[.)]", text):
        if _valid(match.group(1), n_choices):
            return ord(match.group(1)) - ord("A")

    last = None
    for match in re.finditer(r"(?<![A-Za-z])([A-H])(?![A-Za-z])", text):
        if _valid(match.group(1), n_choices):
            last = match.group(1)
    if last is not None:
        return ord(last) - ord("A")

    logger.info("extraction_failed", preview=text[:60])
    return None
