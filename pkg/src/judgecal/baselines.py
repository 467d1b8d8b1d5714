"""Aggregators that need no calibration: majority vote, Soft-SC, CI-SC and the
rounded median used for two-sample modes.

Every rule resolves ties between top-scoring labels to 0. The confidence
rules first break score ties by vote count among the tied labels.
"""

from __future__ import annotations

import enum
import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .core import LABELS, VoteCounts, check_label


@dataclass(frozen=True)
class ConfidentVote:
    label: int
    confidence: float

    def __post_init__(self):
        check_label(self.label)
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


class SoftReducer(str, enum.Enum):
    MIN = "min"
    MEAN = "mean"
    PRODUCT = "product"


def _argmax_or_tie(scores: Tuple[float, ...], counts: Optional[Tuple[int, ...]] = None) -> int:
    """Label with the strictly largest score in ``(-1, 0, +1)`` order.

    With ``counts``, a score tie goes to the tied label with the most votes.
    Anything still tied gives 0.
    """
    best = max(scores)
    winners = [k for k, sc in enumerate(scores) if sc == best]
    if len(winners) > 1 and counts is not None:
        top = max(counts[k] for k in winners)
        winners = [k for k in winners if counts[k] == top]
    return LABELS[winners[0]] if len(winners) == 1 else 0


def majority_vote(counts: VoteCounts) -> int:
    return _argmax_or_tie((counts.c_minus, counts.c_tie, counts.c_plus))


def majority_labels(counts: np.ndarray) -> np.ndarray:
    """Vectorized ``majority_vote`` over an ``(N, 3)`` count array."""
    counts = np.asarray(counts)
    top = counts.max(axis=1, keepdims=True)
    is_top = counts == top
    unique = is_top.sum(axis=1) == 1
    winner = np.argmax(counts, axis=1) - 1
    return np.where(unique, winner, 0).astype(np.int64)


def _grouped(votes: Sequence[ConfidentVote]):
    if len(votes) == 0:
        raise ValueError("at least one vote is required")
    groups = {lab: [] for lab in LABELS}
    for v in votes:
        groups[v.label].append(v.confidence)
    return groups


_REDUCERS = {
    SoftReducer.MIN: min,
    # exact rational mean, so equal confidences reduce to exactly that value
    SoftReducer.MEAN: statistics.mean,
    SoftReducer.PRODUCT: math.prod,
}


def soft_sc(votes: Sequence[ConfidentVote], reducer: SoftReducer = SoftReducer.MEAN) -> int:
    """Reduce each label's confidences; labels nobody voted for score -inf."""
    reduce = _REDUCERS[SoftReducer(reducer)]
    groups = _grouped(votes)
    scores = tuple(reduce(groups[lab]) if groups[lab] else -math.inf for lab in LABELS)
    return _argmax_or_tie(scores, tuple(len(groups[lab]) for lab in LABELS))


def ci_sc(votes: Sequence[ConfidentVote]) -> int:
    """Confidence-weighted majority vote."""
    groups = _grouped(votes)
    return _argmax_or_tie(tuple(math.fsum(groups[lab]) for lab in LABELS),
                          tuple(len(groups[lab]) for lab in LABELS))


def rounded_median(pair: Iterable[int]) -> int:
    """Median of two labels, half-integers rounded away from zero."""
    a, b = (check_label(x) for x in pair)
    twice = a + b
    if twice % 2 == 0:
        return twice // 2
    return 1 if twice > 0 else -1
