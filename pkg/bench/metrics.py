"""Accuracy and relative-change arithmetic, rounded the way the result tables print it."""

from decimal import ROUND_HALF_UP, Decimal
from typing import Tuple

from scipy.stats import binom

from errors import UndefinedBaselineError

ONE_DECIMAL = Decimal("0.1")


def round1(value: float) -> float:
    """One decimal, halves away from zero (2.25 -> 2.3, -2.25 -> -2.3)."""
    result = float(Decimal(repr(value)).quantize(ONE_DECIMAL, rounding=ROUND_HALF_UP))
    return 0.0 if result == 0 else result


def accuracy_pct(correct: int, n_questions: int) -> float:
    """Unrounded accuracy in percent; 0.0 for an empty cell."""
    if n_questions <= 0:
        return 0.0
    return correct / n_questions * 100.0


def relative_change(new_pct: float, base_pct: float) -> float:
    """(new - base) / base * 100 at one decimal."""
    if base_pct == 0:
        raise UndefinedBaselineError("relative change against a 0% baseline is undefined")
    new, base = Decimal(repr(new_pct)), Decimal(repr(base_pct))
    change = (new - base) / base * 100
    result = float(change.quantize(ONE_DECIMAL, rounding=ROUND_HALF_UP))
    return 0.0 if result == 0 else result


def binomial_interval(n: int, p: float = 0.25, confidence: float = 0.99) -> Tuple[float, float]:
    """Central interval of the accuracy (in percent) a guesser with hit rate ``p`` lands in."""
    low, high = binom.interval(confidence, n, p)
    return low / n * 100.0, high / n * 100.0
