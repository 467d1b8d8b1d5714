"""Count features, Davidson tie model, MAE risks, Bayes action and DRPS.

Labels are the integers -1, 0, +1. Wherever a three-column array appears the
column order is ``(-1, 0, +1)``, i.e. ``(minus, tie, plus)``.

The array functions (``features``, ``probs``, ``risks``, ``bayes_labels``,
``drps_array``) are vectorized over items and do all the numeric work; the
dataclass wrappers below them are the typed single-item API.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

LABELS = (-1, 0, 1)

# Absolute tolerance for treating two expected risks as equal.
RISK_TOL = 1e-12


def check_label(label: int) -> int:
    if label not in LABELS:
        raise ValueError(f"label must be one of -1, 0, 1, got {label!r}")
    return int(label)


@dataclass(frozen=True)
class VoteCounts:
    c_plus: int
    c_minus: int
    c_tie: int

    def __post_init__(self):
        if min(self.c_plus, self.c_minus, self.c_tie) < 0:
            raise ValueError(f"counts must be non-negative: {self}")
        if self.n < 1:
            raise ValueError("at least one vote is required")

    @property
    def n(self) -> int:
        return self.c_plus + self.c_minus + self.c_tie

    def as_array(self) -> np.ndarray:
        """Counts in ``(minus, tie, plus)`` column order."""
        return np.array([self.c_minus, self.c_tie, self.c_plus], dtype=np.int64)


@dataclass(frozen=True)
class Smoothing:
    alpha: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.kappa > 0):
            raise ValueError(f"smoothing constants must be positive: {self}")


@dataclass(frozen=True)
class FeaturePair:
    s: float
    t: float


@dataclass(frozen=True)
class DavidsonParams:
    beta: float
    nu: float
    gamma: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not np.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite, got {self.gamma}")

    @property
    def eta0(self) -> float:
        return float(np.log(self.nu))


@dataclass(frozen=True)
class TernaryDistribution:
    p_minus: float
    p_tie: float
    p_plus: float

    def __post_init__(self):
        p = (self.p_minus, self.p_tie, self.p_plus)
        if any(not 0.0 <= x <= 1.0 for x in p):
            raise ValueError(f"probabilities must lie in [0, 1]: {p}")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1: {p}")

    @classmethod
    def from_array(cls, p) -> "TernaryDistribution":
        return cls(float(p[0]), float(p[1]), float(p[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.p_minus, self.p_tie, self.p_plus])


# ---------------------------------------------------------------------------
# vectorized kernels


def features(c_plus, c_minus, c_tie, alpha: float = 1.0, kappa: float = 1.0):
    """Smoothed log-odds margin ``s`` and tie evidence ``t`` (natural log)."""
    c_plus = np.asarray(c_plus, dtype=float)
    c_minus = np.asarray(c_minus, dtype=float)
    c_tie = np.asarray(c_tie, dtype=float)
    n = c_plus + c_minus + c_tie
    # difference of logs keeps s exactly antisymmetric in (c_plus, c_minus)
    s = 0.5 * (np.log(c_plus + alpha) - np.log(c_minus + alpha))
    t = np.log((c_tie + kappa) / (n + kappa))
    return s, t


def features_from_counts(counts: np.ndarray, alpha: float = 1.0, kappa: float = 1.0):
    """``features`` for an ``(N, 3)`` count array in ``(minus, tie, plus)`` order."""
    counts = np.asarray(counts)
    return features(counts[:, 2], counts[:, 0], counts[:, 1], alpha, kappa)


def logits(s, t, beta: float, log_nu: float, gamma: float) -> np.ndarray:
    u = beta * np.asarray(s, dtype=float)
    eta = log_nu + gamma * np.asarray(t, dtype=float)
    return np.stack(np.broadcast_arrays(-u, eta, u), axis=-1)


def softmax3(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def probs(s, t, beta: float, nu: float, gamma: float) -> np.ndarray:
    """Davidson label probabilities, shape ``(..., 3)``."""
    return softmax3(logits(s, t, beta, np.log(nu), gamma))


def risks(p: np.ndarray) -> np.ndarray:
    """Expected absolute error of predicting -1, 0, +1 under ``p``."""
    p = np.asarray(p, dtype=float)
    pm, p0, pp = p[..., 0], p[..., 1], p[..., 2]
    return np.stack([p0 + 2.0 * pp, pp + pm, 2.0 * pm + p0], axis=-1)


def bayes_labels(p: np.ndarray) -> np.ndarray:
    """Risk-minimizing label per row.

    Risks within ``RISK_TOL`` of the minimum count as tied. Ties go to 0, then
    to the label with more probability mass, then to +1.
    """
    p = np.asarray(p, dtype=float)
    r = risks(p)
    cand = r <= r.min(axis=-1, keepdims=True) + RISK_TOL
    both = cand[..., 0] & cand[..., 2]
    side = np.where(both, np.where(p[..., 0] > p[..., 2], -1, 1),
                    np.where(cand[..., 2], 1, -1))
    return np.where(cand[..., 1], 0, side).astype(np.int64)


def drps_array(p: np.ndarray, truth) -> np.ndarray:
    """Per-row discrete ranked probability score against integer labels."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(truth)
    f_minus = p[..., 0]
    f_tie = p[..., 0] + p[..., 1]
    h_minus = (y <= -1).astype(float)
    h_tie = (y <= 0).astype(float)
    return (f_minus - h_minus) ** 2 + (f_tie - h_tie) ** 2


# ---------------------------------------------------------------------------
# typed single-item API


def compute_features(counts: VoteCounts, smoothing: Smoothing = Smoothing()) -> FeaturePair:
    s, t = features(counts.c_plus, counts.c_minus, counts.c_tie,
                    smoothing.alpha, smoothing.kappa)
    return FeaturePair(float(s), float(t))


def davidson_probs(feats: FeaturePair, params: DavidsonParams) -> TernaryDistribution:
    p = probs(feats.s, feats.t, params.beta, params.nu, params.gamma)
    return TernaryDistribution.from_array(p)


def mae_risks(dist: TernaryDistribution) -> Tuple[float, float, float]:
    """Returns ``(R(-1), R(0), R(+1))``."""
    r = risks(dist.as_array())
    return float(r[0]), float(r[1]), float(r[2])


def bayes_action(dist: TernaryDistribution) -> int:
    return int(bayes_labels(dist.as_array()))


def drps(dist: TernaryDistribution, truth: int) -> float:
    return float(drps_array(dist.as_array(), check_label(truth)))
