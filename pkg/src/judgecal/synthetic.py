"""Synthetic judge votes whose gold labels follow the Davidson law exactly.

Per item: judge probabilities ``q ~ Dirichlet(concentration)`` over
``(minus, tie, plus)``; each vote is drawn from ``q`` shifted by the
positional bias of its presentation order; the gold label is drawn from the
Davidson distribution of the item's tallied features under ``theta_true``.
On such data the Davidson model is well specified, so a DRPS fit can be
checked against the generating parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple

import numpy as np

from .core import DavidsonParams, features_from_counts, probs, risks
from .data_io import Dataset, ItemLabel, VoteRecord
from .rng import stream


@dataclass(frozen=True)
class GeneratorConfig:
    theta_true: DavidsonParams = DavidsonParams(1.0, 1.0, 1.0)
    num_items: int = 1000
    votes_per_item: int = 12
    dirichlet_concentration: Tuple[float, float, float] = (2.0, 2.0, 2.0)
    order_bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_items < 1:
            raise ValueError("num_items must be >= 1")
        if self.votes_per_item < 1:
            raise ValueError("votes_per_item must be >= 1")
        if len(self.dirichlet_concentration) != 3 or min(self.dirichlet_concentration) <= 0:
            raise ValueError("dirichlet_concentration must be three positive numbers")
        if not -1.0 <= self.order_bias <= 1.0:
            raise ValueError("order_bias must lie in [-1, 1]")


def shift_for_order(q: np.ndarray, bias: float, sign) -> np.ndarray:
    """Move ``sign * bias`` of mass from minus to plus, clamp, renormalize."""
    shift = bias * np.asarray(sign, dtype=float)
    out = np.array(np.broadcast_to(q, np.broadcast_shapes(np.shape(q), shift.shape + (3,))), dtype=float)
    out[..., 2] += shift
    out[..., 0] -= shift
    np.clip(out, 0.0, 1.0, out=out)
    return out / out.sum(axis=-1, keepdims=True)


def _sample_labels(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=-1)
    return ((u > cdf[..., 0]).astype(np.int64) + (u > cdf[..., 1]) - 1).astype(np.int64)


@dataclass(frozen=True)
class SyntheticData:
    """Generated votes in array form.

    ``orders`` holds 0 for AB and 1 for BA; ``raw_labels`` are as presented,
    ``canonical`` in (t1, t2) orientation. All vote arrays are ``(N, n)``.
    """

    config: GeneratorConfig
    item_ids: Tuple[str, ...]
    judge_probs: np.ndarray
    orders: np.ndarray
    canonical: np.ndarray
    raw_labels: np.ndarray
    confidence: np.ndarray
    counts: np.ndarray
    truth: np.ndarray
    true_dist: np.ndarray

    @cached_property
    def features(self):
        return features_from_counts(self.counts)

    def records(self) -> List[VoteRecord]:
        out = []
        names = ("AB", "BA")
        for i, item_id in enumerate(self.item_ids):
            for j in range(self.orders.shape[1]):
                out.append(VoteRecord(item_id, names[self.orders[i, j]], int(self.raw_labels[i, j]),
                                      float(self.confidence[i, j]), j))
        return out

    def labels(self) -> List[ItemLabel]:
        return [ItemLabel(item_id, int(y)) for item_id, y in zip(self.item_ids, self.truth)]

    def dataset(self) -> Dataset:
        votes = tuple(
            tuple((int(lab), float(c)) for lab, c in zip(self.canonical[i], self.confidence[i]))
            for i in range(len(self.item_ids))
        )
        return Dataset(self.item_ids, self.counts, self.truth, votes)

    def bayes_mae(self) -> float:
        """Expected MAE of the true-parameter Bayes action, averaged over items."""
        return float(np.mean(risks(self.true_dist).min(axis=1)))


def counts_from_labels(labels: np.ndarray) -> np.ndarray:
    """``(N, n)`` labels to ``(N, 3)`` counts in (minus, tie, plus) order."""
    return np.stack([(labels == k).sum(axis=1) for k in (-1, 0, 1)], axis=1).astype(np.int64)


def generate_synthetic(cfg: GeneratorConfig) -> SyntheticData:
    """Deterministic for a fixed ``cfg.seed``."""
    n_items, n_votes = cfg.num_items, cfg.votes_per_item
    q = stream(cfg.seed, "judge").dirichlet(cfg.dirichlet_concentration, size=n_items)

    n_ab = (n_votes + 1) // 2
    orders = np.zeros((n_items, n_votes), dtype=np.int64)
    orders[:, n_ab:] = 1
    sign = np.where(orders == 0, 1.0, -1.0)
    vote_p = shift_for_order(q[:, None, :], cfg.order_bias, sign)
    u = stream(cfg.seed, "votes").random((n_items, n_votes))
    canonical = _sample_labels(vote_p, u)
    raw = np.where(orders == 0, canonical, -canonical)
    confidence = np.take_along_axis(vote_p, (canonical + 1)[..., None], axis=-1)[..., 0]

    counts = counts_from_labels(canonical)
    s, t = features_from_counts(counts)
    th = cfg.theta_true
    true_dist = probs(s, t, th.beta, th.nu, th.gamma)
    truth = _sample_labels(true_dist, stream(cfg.seed, "truth").random(n_items))

    width = len(str(n_items - 1))
    item_ids = tuple(f"item-{i:0{width}d}" for i in range(n_items))
    return SyntheticData(cfg, item_ids, q, orders, canonical, raw, confidence,
                         counts, truth, true_dist)
