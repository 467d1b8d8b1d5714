"""Fit Davidson parameters by minimizing mean DRPS on a labeled calibration set.

Optimization runs in ``(beta, log nu, gamma)`` space with L-BFGS-B and an
analytic gradient. ``grid_oracle`` is a brute-force check used by the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .core import DavidsonParams, FeaturePair, check_label, drps_array, logits, softmax3
from .errors import EmptyCalibrationSet, NonFiniteObjective

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Box:
    beta: Tuple[float, float] = (1e-3, 5.0)
    nu: Tuple[float, float] = (1e-4, 1e3)
    gamma: Tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        for name in ("beta", "nu", "gamma"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bad {name} bounds: {(lo, hi)}")
        if self.beta[0] < 0 or self.nu[0] <= 0:
            raise ValueError("beta bounds must be >= 0 and nu bounds > 0")

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "Box":
        """Build from ``beta_lo, beta_hi, nu_lo, nu_hi, gamma_lo, gamma_hi``."""
        if len(values) != 6:
            raise ValueError("box needs six numbers")
        v = [float(x) for x in values]
        return cls((v[0], v[1]), (v[2], v[3]), (v[4], v[5]))

    def flat(self) -> Tuple[float, ...]:
        return (*self.beta, *self.nu, *self.gamma)

    def internal_bounds(self):
        """Bounds in optimizer space ``(beta, log nu, gamma)``."""
        return [self.beta, (float(np.log(self.nu[0])), float(np.log(self.nu[1]))), self.gamma]

    def contains(self, params: DavidsonParams, rtol: float = 1e-9) -> bool:
        lo_b, hi_b = self.beta
        lo_n, hi_n = self.nu
        lo_g, hi_g = self.gamma
        return (lo_b - rtol <= params.beta <= hi_b + rtol
                and lo_n * (1 - rtol) <= params.nu <= hi_n * (1 + rtol)
                and lo_g - rtol <= params.gamma <= hi_g + rtol)


@dataclass(frozen=True)
class CalibrationItem:
    features: FeaturePair
    truth: int

    def __post_init__(self):
        check_label(self.truth)


@dataclass(frozen=True)
class FitConfig:
    box: Box = Box()
    restarts: int = 8
    seed: int = 0
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1 or not self.gradient_tolerance > 0:
            raise ValueError("max_iterations and gradient_tolerance must be positive")


@dataclass(frozen=True)
class RestartRecord:
    index: int
    start: Tuple[float, float, float]
    params: DavidsonParams
    objective: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class FitResult:
    params: DavidsonParams
    objective: float
    restart_index: int
    converged: bool
    restarts: Tuple[RestartRecord, ...] = field(default=(), repr=False)
    cell: Optional[Tuple[int, int, int]] = None


class DRPSObjective:
    """Mean DRPS over a calibration set as a function of ``(beta, log nu, gamma)``."""

    def __init__(self, s, t, truth):
        s = np.asarray(s, dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        y = np.asarray(truth, dtype=np.int64).ravel()
        if s.size == 0:
            raise EmptyCalibrationSet("calibration set is empty")
        if not (s.size == t.size == y.size):
            raise ValueError("s, t and truth must have equal length")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(t))):
            raise NonFiniteObjective("calibration features contain non-finite values")
        # Count features take few distinct values; collapse duplicates into weights.
        rows, counts = np.unique(np.column_stack([s, t, y]), axis=0, return_counts=True)
        self.size = s.size
        self.s = rows[:, 0]
        self.t = rows[:, 1]
        self.y = rows[:, 2].astype(np.int64)
        self.w = counts / s.size
        self.h_minus = (self.y <= -1).astype(float)
        self.h_tie = (self.y <= 0).astype(float)

    def value(self, theta) -> float:
        p = softmax3(logits(self.s, self.t, theta[0], theta[1], theta[2]))
        return float(self.w @ drps_array(p, self.y))

    def value_and_grad(self, theta):
        p = softmax3(logits(self.s, self.t, theta[0], theta[1], theta[2]))
        e1 = p[:, 0] - self.h_minus
        e2 = p[:, 0] + p[:, 1] - self.h_tie
        f = e1 ** 2 + e2 ** 2
        # d f / d p, then through the softmax Jacobian diag(p) - p p^T
        gp = np.stack([2 * (e1 + e2), 2 * e2, np.zeros_like(e1)], axis=1)
        gl = p * (gp - np.sum(p * gp, axis=1, keepdims=True))
        d_u = gl[:, 2] - gl[:, 0]
        d_eta = gl[:, 1]
        w = self.w
        grad = np.array([w @ (d_u * self.s), w @ d_eta, w @ (d_eta * self.t)])
        return float(w @ f), grad

    def __call__(self, theta):
        return self.value_and_grad(theta)


def _unpack(calibration: Sequence[CalibrationItem]):
    if len(calibration) == 0:
        raise EmptyCalibrationSet("calibration set is empty")
    s = np.array([c.features.s for c in calibration], dtype=float)
    t = np.array([c.features.t for c in calibration], dtype=float)
    y = np.array([c.truth for c in calibration], dtype=np.int64)
    return s, t, y


def _projected_gradient_norm(x, g, bounds) -> float:
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return float(np.max(np.abs(np.clip(x - g, lo, hi) - x)))


def restart_starts(config: FitConfig) -> np.ndarray:
    """Starting points in optimizer space, one row per restart.

    Restart 0 is ``(beta=1, nu=1, gamma=1)`` clipped into the box; the others
    draw beta and gamma uniformly and nu log-uniformly from a stream keyed by
    ``(seed, restart_index)``.
    """
    bounds = config.box.internal_bounds()
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    starts = np.empty((config.restarts, 3))
    starts[0] = np.clip([1.0, 0.0, 1.0], lo, hi)
    for k in range(1, config.restarts):
        rng = np.random.default_rng([config.seed, k])
        starts[k] = rng.uniform(lo, hi)
    return starts


def fit_arrays(s, t, truth, config: FitConfig = FitConfig()) -> FitResult:
    """``fit_drps`` on parallel feature/label arrays."""
    objective = DRPSObjective(s, t, truth)
    bounds = config.box.internal_bounds()
    records = []
    for k, x0 in enumerate(restart_starts(config)):
        f0 = objective.value(x0)
        if not np.isfinite(f0):
            raise NonFiniteObjective(f"objective is {f0} at restart {k}")
        res = minimize(
            objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": config.max_iterations, "gtol": config.gradient_tolerance,
                     "ftol": 1e-14},
        )
        if not np.isfinite(res.fun):
            raise NonFiniteObjective(f"objective is {res.fun} at restart {k}")
        x = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
        fx, gx = objective.value_and_grad(x)
        converged = bool(res.success) or _projected_gradient_norm(x, gx, bounds) < config.gradient_tolerance
        params = DavidsonParams(float(x[0]), float(np.exp(x[1])), float(x[2]))
        records.append(RestartRecord(k, tuple(float(v) for v in x0), params, fx, converged, int(res.nit)))
        log.debug("restart %d: objective=%.10g params=%s", k, fx, params)

    # strict < keeps the earliest restart among exact ties
    best = records[0]
    for rec in records[1:]:
        if rec.objective < best.objective:
            best = rec
    params = DavidsonParams(
        beta=float(np.clip(best.params.beta, *config.box.beta)),
        nu=float(np.clip(best.params.nu, *config.box.nu)),
        gamma=float(np.clip(best.params.gamma, *config.box.gamma)),
    )
    return FitResult(params, best.objective, best.index, best.converged, tuple(records))


def fit_drps(calibration: Sequence[CalibrationItem], config: FitConfig = FitConfig()) -> FitResult:
    """Best-of-restarts DRPS fit. Deterministic for a fixed ``config.seed``."""
    return fit_arrays(*_unpack(calibration), config)


def grid_axes(box: Box, resolution: int):
    """Grid nodes: linear in beta and gamma, log-spaced in nu."""
    if resolution < 3:
        raise ValueError("resolution must be >= 3")
    betas = np.linspace(box.beta[0], box.beta[1], resolution)
    nus = np.geomspace(box.nu[0], box.nu[1], resolution)
    gammas = np.linspace(box.gamma[0], box.gamma[1], resolution)
    return betas, nus, gammas


def grid_arrays(s, t, truth, box: Box = Box(), resolution: int = 25) -> FitResult:
    objective = DRPSObjective(s, t, truth)
    betas, nus, gammas = grid_axes(box, resolution)
    log_nus = np.log(nus)[:, None]
    table = np.empty((resolution, resolution, resolution))
    for i, beta in enumerate(betas):
        u = beta * objective.s
        for k, gamma in enumerate(gammas):
            eta = log_nus + gamma * objective.t  # (R, N)
            z = np.stack(np.broadcast_arrays(-u, eta, u), axis=-1)
            p = softmax3(z)
            table[i, :, k] = drps_array(p, objective.y) @ objective.w
    if not np.all(np.isfinite(table)):
        raise NonFiniteObjective("grid objective is not finite")
    i, j, k = np.unravel_index(int(np.argmin(table)), table.shape)
    params = DavidsonParams(float(betas[i]), float(nus[j]), float(gammas[k]))
    return FitResult(params, float(table[i, j, k]), -1, True, (), (int(i), int(j), int(k)))


def grid_oracle(calibration: Sequence[CalibrationItem], box: Box = Box(),
                resolution: int = 25) -> FitResult:
    """Exhaustive search over ``resolution**3`` grid nodes; returns the best node."""
    return grid_arrays(*_unpack(calibration), box, resolution)


def grid_steps(box: Box, resolution: int) -> Tuple[float, float, float]:
    """Node spacing per axis: beta, log nu, gamma."""
    d = resolution - 1
    return ((box.beta[1] - box.beta[0]) / d,
            float(np.log(box.nu[1] / box.nu[0])) / d,
            (box.gamma[1] - box.gamma[0]) / d)
