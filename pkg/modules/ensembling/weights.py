"""Competitive weights (r1, r2) from the two students' supervised dice losses."""
import math
from dataclasses import dataclass

from core import DomainError

STRATEGIES = ("unidirectional", "bidirectional", "classic")
_DEGENERATE_DENOM = 1e-8


@dataclass(frozen=True, slots=True)
class CompetitiveWeights:
    r1: float
    r2: float
    strategy: str

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise DomainError(f"unknown strategy {self.strategy!r}")
        if not (0.0 <= self.r1 <= 1.0 and 0.0 <= self.r2 <= 1.0):
            raise DomainError(f"weights must lie in [0, 1], got ({self.r1}, {self.r2})")
        if abs(self.r1 + self.r2 - 1.0) > 4 * math.ulp(1.0):
            raise DomainError(f"weights must sum to 1, got ({self.r1}, {self.r2})")


def _check_loss(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must be a dice loss in [0, 1], got {value}")


def weights_unidirectional(l1: float, l2: float) -> CompetitiveWeights:
    """Winner takes all; a tie goes to student 2."""
    _check_loss("l1", l1)
    _check_loss("l2", l2)
    r1 = 1.0 if l1 < l2 else 0.0
    return CompetitiveWeights(r1, 1.0 - r1, "unidirectional")


def weights_bidirectional(l1: float, l2: float) -> CompetitiveWeights:
    """Weights proportional to (1 − l); (0.5, 0.5) when both losses are ~1."""
    _check_loss("l1", l1)
    _check_loss("l2", l2)
    denom = 2.0 - l1 - l2
    if denom < _DEGENERATE_DENOM or l1 == l2:
        return CompetitiveWeights(0.5, 0.5, "bidirectional")
    # the larger weight comes from the formula, the smaller is its complement
    if l1 < l2:
        r1 = min(1.0, (1.0 - l1) / denom)
        r2 = 1.0 - r1
    else:
        r2 = min(1.0, (1.0 - l2) / denom)
        r1 = 1.0 - r2
    return CompetitiveWeights(r1, r2, "bidirectional")


def weights_classic() -> CompetitiveWeights:
    return CompetitiveWeights(1.0, 0.0, "classic")


def competitive_weights(strategy: str, l1: float, l2: float) -> CompetitiveWeights:
    if strategy == "unidirectional":
        return weights_unidirectional(l1, l2)
    if strategy == "bidirectional":
        return weights_bidirectional(l1, l2)
    if strategy == "classic":
        return weights_classic()
    raise DomainError(f"unknown strategy {strategy!r}")
