"""Meta-evaluation: metrics, repeated calibration/evaluation splits, paired
permutation tests with top-cluster ranking, leave-one-out rater comparison,
transfer matrices, calibration-size sweeps and order-balance reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .baselines import SoftReducer, ci_sc, majority_labels, rounded_median, soft_sc
from .calibrate import FitConfig, FitResult, fit_arrays
from .core import DavidsonParams, LABELS, Smoothing, bayes_labels, features_from_counts, probs
from .data_io import Dataset, VoteRecord, build_dataset
from .errors import (EmptyInput, InsufficientData, LengthMismatch, MissingOrder, TooFewRaters)
from .rng import derive_seed, stream


@dataclass(frozen=True)
class LabeledPrediction:
    item_id: str
    predicted: int
    truth: int


@dataclass(frozen=True)
class SplitConfig:
    calibration_ratio: float = 0.05
    num_splits: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.calibration_ratio < 1.0:
            raise ValueError("calibration_ratio must lie in (0, 1)")
        if self.num_splits < 1:
            raise ValueError("num_splits must be >= 1")

    def calibration_size(self, n_items: int) -> int:
        k = int(round(self.calibration_ratio * n_items))
        if k < 1 or k >= n_items:
            raise InsufficientData(
                f"{n_items} items at ratio {self.calibration_ratio} give calibration size {k}")
        return k


@dataclass(frozen=True)
class SignificanceConfig:
    resamples_per_split: int = 100
    tau: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.resamples_per_split < 1:
            raise ValueError("resamples_per_split must be >= 1")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")


@dataclass(frozen=True)
class MethodScore:
    method_id: str
    mae: float
    pairwise_accuracy: float
    rank: int
    in_top_cluster: bool


# ---------------------------------------------------------------------------
# metrics


def _arrays(preds: Sequence[LabeledPrediction]):
    if len(preds) == 0:
        raise EmptyInput("no predictions")
    return (np.array([p.predicted for p in preds], dtype=np.int64),
            np.array([p.truth for p in preds], dtype=np.int64))


def mae(preds: Sequence[LabeledPrediction]) -> float:
    return float(np.mean(np.abs(np.subtract(*_arrays(preds)))))


def pairwise_accuracy(preds: Sequence[LabeledPrediction]) -> float:
    yhat, y = _arrays(preds)
    return float(np.mean(yhat == y))


@dataclass(frozen=True)
class ConfusionReport:
    """Rows are truth and columns prediction, both in (-1, 0, +1) order."""

    counts: np.ndarray
    row_percent: np.ndarray
    predicted_histogram: np.ndarray
    truth_histogram: np.ndarray


def confusion_from_counts(counts: np.ndarray) -> ConfusionReport:
    counts = np.asarray(counts, dtype=float)
    rows = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pct = np.where(rows > 0, 100.0 * counts / rows, 0.0)
    return ConfusionReport(counts, pct, counts.sum(axis=0), counts.sum(axis=1))


def confusion_matrix(predicted, truth) -> np.ndarray:
    m = np.zeros((3, 3), dtype=np.int64)
    np.add.at(m, (np.asarray(truth) + 1, np.asarray(predicted) + 1), 1)
    return m


def confusion_report(preds: Sequence[LabeledPrediction]) -> ConfusionReport:
    yhat, y = _arrays(preds)
    return confusion_from_counts(confusion_matrix(yhat, y))


def ci_half_width(values) -> float:
    """1.96 standard errors of the mean; 0 for a single value."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(1.96 * v.std(ddof=1) / math.sqrt(v.size))


# ---------------------------------------------------------------------------
# aggregator bindings


class Method:
    """An aggregator that may be fit on calibration items before predicting."""

    name: str = "method"
    needs_calibration: bool = False

    def fit(self, calibration: Dataset, seed: int) -> "Method":
        return self

    def predict(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError


class SelfConsistency(Method):
    name = "sc"

    def predict(self, data):
        return majority_labels(data.counts)


class SoftSC(Method):
    name = "soft-sc"

    def __init__(self, reducer: Union[SoftReducer, str] = SoftReducer.MEAN):
        self.reducer = SoftReducer(reducer)

    def predict(self, data):
        return np.array([soft_sc(data.confident_votes(i), self.reducer) for i in range(len(data))],
                        dtype=np.int64)


class CISC(Method):
    name = "ci-sc"

    def predict(self, data):
        return np.array([ci_sc(data.confident_votes(i)) for i in range(len(data))], dtype=np.int64)


class RoundedMedian(Method):
    """Two-sample aggregation; items must carry exactly two votes."""

    name = "median"

    def predict(self, data):
        if data.votes is None:
            raise InsufficientData("rounded median needs per-vote records")
        out = []
        for item_id, votes in zip(data.item_ids, data.votes):
            if len(votes) != 2:
                raise InsufficientData(f"item {item_id!r} has {len(votes)} votes; median needs 2")
            out.append(rounded_median((votes[0][0], votes[1][0])))
        return np.array(out, dtype=np.int64)


class FixedBTD(Method):
    """Davidson aggregation with given parameters."""

    name = "btd-fixed"

    def __init__(self, params: DavidsonParams, smoothing: Smoothing = Smoothing()):
        self.params = params
        self.smoothing = smoothing

    def probs(self, data: Dataset) -> np.ndarray:
        s, t = features_from_counts(data.counts, self.smoothing.alpha, self.smoothing.kappa)
        p = self.params
        return probs(s, t, p.beta, p.nu, p.gamma)

    def predict(self, data):
        return bayes_labels(self.probs(data))


class BTD(Method):
    """Davidson aggregation with parameters fit on each calibration split."""

    name = "btd"
    needs_calibration = True

    def __init__(self, fit: FitConfig = FitConfig(), smoothing: Smoothing = Smoothing()):
        self.fit_config = fit
        self.smoothing = smoothing
        self.result: Optional[FitResult] = None

    def fit(self, calibration, seed):
        s, t = features_from_counts(calibration.counts, self.smoothing.alpha, self.smoothing.kappa)
        result = fit_arrays(s, t, calibration.truth, replace(self.fit_config, seed=seed))
        fitted = FittedBTD(result.params, self.smoothing)
        fitted.result = result
        return fitted

    def predict(self, data):
        raise RuntimeError("BTD must be fit before predicting")


class FittedBTD(FixedBTD):
    name = "btd"
    result: Optional[FitResult] = None


def make_method(name: str, fit: FitConfig = FitConfig(), smoothing: Smoothing = Smoothing(),
                reducer: Union[SoftReducer, str] = SoftReducer.MEAN) -> Method:
    if name == "btd":
        return BTD(fit, smoothing)
    if name == "sc":
        return SelfConsistency()
    if name == "soft-sc":
        return SoftSC(reducer)
    if name == "ci-sc":
        return CISC()
    if name == "median":
        return RoundedMedian()
    raise ValueError(f"unknown method {name!r}")


def _method_ids(methods: Sequence[Method]) -> List[str]:
    ids, seen = [], {}
    for m in methods:
        base = m.name
        seen[base] = seen.get(base, 0) + 1
        ids.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
    return ids


# ---------------------------------------------------------------------------
# repeated splits


def split_indices(n_items: int, split: SplitConfig, index: int, *keys):
    """Sorted ``(calibration, evaluation)`` index arrays for one split."""
    k = split.calibration_size(n_items)
    perm = stream(split.seed, "split", *keys, index).permutation(n_items)
    return np.sort(perm[:k]), np.sort(perm[k:])


@dataclass
class SplitRun:
    """Per-split predictions of several methods on shared evaluation sets."""

    method_ids: List[str]
    truth: np.ndarray
    calibration: List[np.ndarray]
    evaluation: List[np.ndarray]
    predictions: Dict[str, List[np.ndarray]]
    params: Dict[str, List[DavidsonParams]] = field(default_factory=dict)

    @property
    def num_splits(self) -> int:
        return len(self.evaluation)

    def losses(self, method_id: str, split: int, metric: str = "mae") -> np.ndarray:
        """Per-item loss on one split: absolute error, or 1 - exact match for PA."""
        y = self.truth[self.evaluation[split]]
        yhat = self.predictions[method_id][split]
        if metric == "mae":
            return np.abs(yhat - y).astype(float)
        if metric == "pa":
            return (yhat != y).astype(float)
        raise ValueError(f"unknown metric {metric!r}")

    def mae(self, method_id: str) -> np.ndarray:
        return np.array([self.losses(method_id, s).mean() for s in range(self.num_splits)])

    def pa(self, method_id: str) -> np.ndarray:
        return np.array([1.0 - self.losses(method_id, s, "pa").mean() for s in range(self.num_splits)])

    def confusion(self, method_id: str) -> ConfusionReport:
        """Mean per-split confusion counts."""
        total = np.zeros((3, 3))
        for s in range(self.num_splits):
            total += confusion_matrix(self.predictions[method_id][s], self.truth[self.evaluation[s]])
        return confusion_from_counts(total / self.num_splits)


def run_splits(data: Dataset, methods: Sequence[Union[Method, str]], split: SplitConfig = SplitConfig(),
               fit: FitConfig = FitConfig(), smoothing: Smoothing = Smoothing()) -> SplitRun:
    """Fit calibrated methods on each calibration split and score everything
    on its complement. Method names are expanded with ``make_method``.

    A method's results depend only on the seeds and its own binding, not on
    its position in ``methods``.
    """
    methods = [make_method(m, fit, smoothing) if isinstance(m, str) else m for m in methods]
    if not methods:
        raise ValueError("at least one method is required")
    ids = _method_ids(methods)
    calib_sets, eval_sets = [], []
    preds: Dict[str, List[np.ndarray]] = {i: [] for i in ids}
    params: Dict[str, List[DavidsonParams]] = {}
    for s in range(split.num_splits):
        cal, ev = split_indices(len(data), split, s)
        calib_sets.append(cal)
        eval_sets.append(ev)
        cal_data, ev_data = data.subset(cal), data.subset(ev)
        for mid, method in zip(ids, methods):
            bound = method
            if method.needs_calibration:
                fit_seed = getattr(method, "fit_config", fit).seed
                bound = method.fit(cal_data, derive_seed(fit_seed, "split", s))
                if isinstance(bound, FixedBTD):
                    params.setdefault(mid, []).append(bound.params)
            preds[mid].append(bound.predict(ev_data))
    return SplitRun(ids, data.truth, calib_sets, eval_sets, preds, params)


# ---------------------------------------------------------------------------
# significance


def _sign_flip_stats(diff: np.ndarray, resamples: int, rng: np.random.Generator) -> np.ndarray:
    signs = rng.integers(0, 2, size=(resamples, diff.size), dtype=np.int8) * 2 - 1
    return (signs @ diff) / diff.size


def pooled_permutation_test(diffs: Sequence[np.ndarray], cfg: SignificanceConfig = SignificanceConfig()) -> float:
    """Sign-flip test on paired loss differences pooled over splits.

    The observed statistic is the mean over splits of the per-split mean
    difference. Every split contributes ``cfg.resamples_per_split`` sign-flip
    statistics to one null sample, and
    ``p = (1 + #{|null| >= |observed|}) / (1 + size of null)``.
    The resampling stream depends only on ``(cfg.seed, split)``, so
    ``p(a, b) == p(b, a)``.
    """
    if len(diffs) == 0:
        raise EmptyInput("no splits")
    diffs = [np.asarray(d, dtype=float) for d in diffs]
    if any(d.size == 0 for d in diffs):
        raise EmptyInput("empty evaluation split")
    observed = abs(float(np.mean([d.mean() for d in diffs])))
    scale = max(float(np.mean([np.abs(d).mean() for d in diffs])), 1e-300)
    atol = 1e-12 * scale
    hits = 0
    for s, d in enumerate(diffs):
        null = _sign_flip_stats(d, cfg.resamples_per_split, stream(cfg.seed, "resample", s))
        hits += int(np.count_nonzero(np.abs(null) >= observed - atol))
    return (1 + hits) / (1 + cfg.resamples_per_split * len(diffs))


def paired_permutation_test(losses_a, losses_b, cfg: SignificanceConfig = SignificanceConfig()) -> float:
    """Two-sided sign-flip permutation test on one set of paired losses."""
    a = np.asarray(losses_a, dtype=float)
    b = np.asarray(losses_b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"loss vectors differ in length: {a.size} vs {b.size}")
    return pooled_permutation_test([a - b], cfg)


def pvalue_matrix(run: SplitRun, metric: str = "mae",
                  cfg: SignificanceConfig = SignificanceConfig()) -> np.ndarray:
    ids = run.method_ids
    m = np.ones((len(ids), len(ids)))
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            diffs = [run.losses(ids[i], s, metric) - run.losses(ids[j], s, metric)
                     for s in range(run.num_splits)]
            m[i, j] = m[j, i] = pooled_permutation_test(diffs, cfg)
    return m


def _sorted_ids(method_means: Sequence[Tuple[str, float]], higher_is_better: bool) -> List[str]:
    key = (lambda kv: -kv[1]) if higher_is_better else (lambda kv: kv[1])
    return [mid for mid, _ in sorted(method_means, key=key)]


def top_cluster(method_means: Sequence[Tuple[str, float]],
                pairwise_p: Mapping[Tuple[str, str], float], tau: float = 0.05,
                higher_is_better: bool = False) -> Set[str]:
    """Greedy top cluster: walk methods best-first and stop at the first one
    significantly different (``p < tau``) from any method already included.

    ``pairwise_p`` maps ``(a, b)`` pairs to p-values; either key order works.
    """
    if not method_means:
        return set()
    order = _sorted_ids(method_means, higher_is_better)
    cluster = [order[0]]
    for cand in order[1:]:
        ps = [pairwise_p[(cand, m)] if (cand, m) in pairwise_p else pairwise_p[(m, cand)]
              for m in cluster]
        if min(ps) < tau:
            break
        cluster.append(cand)
    return set(cluster)


def cluster_ranks(method_means: Sequence[Tuple[str, float]],
                  pairwise_p: Mapping[Tuple[str, str], float], tau: float = 0.05,
                  higher_is_better: bool = False) -> Dict[str, int]:
    """Rank 1 for the top cluster, rank 2 for the top cluster of the rest, and so on."""
    remaining = list(method_means)
    ranks: Dict[str, int] = {}
    rank = 1
    while remaining:
        cluster = top_cluster(remaining, pairwise_p, tau, higher_is_better)
        for mid in cluster:
            ranks[mid] = rank
        remaining = [kv for kv in remaining if kv[0] not in cluster]
        rank += 1
    return ranks


def _pairs(ids: Sequence[str], matrix: np.ndarray) -> Dict[Tuple[str, str], float]:
    return {(a, b): float(matrix[i, j]) for i, a in enumerate(ids) for j, b in enumerate(ids)}


@dataclass
class EvaluationSummary:
    method_ids: List[str]
    mae_mean: Dict[str, float]
    mae_ci: Dict[str, float]
    pa_mean: Dict[str, float]
    pa_ci: Dict[str, float]
    p_mae: np.ndarray
    p_pa: np.ndarray
    mae_scores: List[MethodScore]
    pa_scores: List[MethodScore]

    def to_dict(self) -> dict:
        ids = self.method_ids
        mae_by = {s.method_id: s for s in self.mae_scores}
        pa_by = {s.method_id: s for s in self.pa_scores}
        return {
            "methods": [
                {
                    "method_id": m,
                    "mae": self.mae_mean[m],
                    "mae_ci95": self.mae_ci[m],
                    "pairwise_accuracy": self.pa_mean[m],
                    "pairwise_accuracy_ci95": self.pa_ci[m],
                    "mae_rank": mae_by[m].rank,
                    "mae_top_cluster": mae_by[m].in_top_cluster,
                    "pa_rank": pa_by[m].rank,
                    "pa_top_cluster": pa_by[m].in_top_cluster,
                }
                for m in ids
            ],
            "p_values": {
                "mae": {a: {b: float(self.p_mae[i, j]) for j, b in enumerate(ids)} for i, a in enumerate(ids)},
                "pa": {a: {b: float(self.p_pa[i, j]) for j, b in enumerate(ids)} for i, a in enumerate(ids)},
            },
        }


def summarize(run: SplitRun, cfg: SignificanceConfig = SignificanceConfig()) -> EvaluationSummary:
    ids = run.method_ids
    mae_vals = {m: run.mae(m) for m in ids}
    pa_vals = {m: run.pa(m) for m in ids}
    mae_mean = {m: float(v.mean()) for m, v in mae_vals.items()}
    pa_mean = {m: float(v.mean()) for m, v in pa_vals.items()}
    p_mae = pvalue_matrix(run, "mae", cfg)
    p_pa = pvalue_matrix(run, "pa", cfg)
    mae_ranks = cluster_ranks(list(mae_mean.items()), _pairs(ids, p_mae), cfg.tau)
    pa_ranks = cluster_ranks(list(pa_mean.items()), _pairs(ids, p_pa), cfg.tau, higher_is_better=True)
    mae_scores = [MethodScore(m, mae_mean[m], pa_mean[m], mae_ranks[m], mae_ranks[m] == 1) for m in ids]
    pa_scores = [MethodScore(m, mae_mean[m], pa_mean[m], pa_ranks[m], pa_ranks[m] == 1) for m in ids]
    return EvaluationSummary(ids, mae_mean, {m: ci_half_width(v) for m, v in mae_vals.items()},
                             pa_mean, {m: ci_half_width(v) for m, v in pa_vals.items()},
                             p_mae, p_pa, mae_scores, pa_scores)


# ---------------------------------------------------------------------------
# leave-one-out against human raters


@dataclass(frozen=True)
class LOORow:
    rater: str
    human_pa: float
    system_pa: float
    win: bool
    items: int


def leave_one_out(human_ratings, system_preds, rater_ids: Optional[Sequence[str]] = None) -> List[LOORow]:
    """Per-rater comparison against the majority vote of the other raters.

    ``human_ratings`` is ``(items, raters)`` with entries -1/0/+1, or NaN where
    a rater skipped an item. Each row scores rater ``i`` and the system on the
    items rater ``i`` labeled and at least one other rater labeled.
    """
    h = np.asarray(human_ratings, dtype=float)
    sys_pred = np.asarray(system_preds, dtype=np.int64)
    if h.ndim != 2:
        raise ValueError("human_ratings must be a 2-D matrix")
    n_items, n_raters = h.shape
    if n_raters < 3:
        raise TooFewRaters(f"leave-one-out needs >= 3 raters, got {n_raters}")
    if sys_pred.shape != (n_items,):
        raise LengthMismatch(f"{sys_pred.size} system predictions for {n_items} items")
    if rater_ids is None:
        rater_ids = [f"R{i + 1}" for i in range(n_raters)]
    rows = []
    for i in range(n_raters):
        others = np.delete(h, i, axis=1)
        counts = np.stack([(others == k).sum(axis=1) for k in LABELS], axis=1)
        gt = majority_labels(counts)
        mask = ~np.isnan(h[:, i]) & (counts.sum(axis=1) > 0)
        if not mask.any():
            raise InsufficientData(f"rater {rater_ids[i]!r} shares no items with the others")
        human_pa = float(np.mean(h[mask, i] == gt[mask]))
        system_pa = float(np.mean(sys_pred[mask] == gt[mask]))
        rows.append(LOORow(str(rater_ids[i]), human_pa, system_pa, system_pa > human_pa, int(mask.sum())))
    return rows


# ---------------------------------------------------------------------------
# transfer, size sweep, order balance


def _fit_btd(data: Dataset, idx, fit: FitConfig, smoothing: Smoothing, seed: int) -> FixedBTD:
    return BTD(fit, smoothing).fit(data.subset(idx), seed)


def _mae_of(method: Method, data: Dataset) -> float:
    return float(np.mean(np.abs(method.predict(data) - data.truth)))


def transfer_matrix(tasks: Sequence[Dataset], split: SplitConfig = SplitConfig(),
                    fit: FitConfig = FitConfig(), smoothing: Smoothing = Smoothing()) -> np.ndarray:
    """Mean change in target MAE from calibrating on the source task instead
    of the target itself. Rows are sources, columns targets; diagonal is 0.
    """
    if len(tasks) < 2:
        raise InsufficientData("transfer needs at least two tasks")
    T = len(tasks)
    total = np.zeros((T, T))
    for s in range(split.num_splits):
        fitted, evals = [], []
        for j, task in enumerate(tasks):
            cal, ev = split_indices(len(task), split, s, "transfer", j)
            fitted.append(_fit_btd(task, cal, fit, smoothing, derive_seed(fit.seed, "transfer", j, s)))
            evals.append(task.subset(ev))
        for tgt in range(T):
            own = _mae_of(fitted[tgt], evals[tgt])
            for src in range(T):
                if src != tgt:
                    total[src, tgt] += _mae_of(fitted[src], evals[tgt]) - own
    return total / split.num_splits


@dataclass(frozen=True)
class SweepPoint:
    size: int
    mean_mae: float
    ci95: float
    maes: Tuple[float, ...]


def calibration_size_sweep(data: Dataset, sizes: Sequence[int], split: SplitConfig = SplitConfig(),
                           fit: FitConfig = FitConfig(), smoothing: Smoothing = Smoothing()) -> List[SweepPoint]:
    """Mean evaluation MAE per calibration size.

    A pool of ``max(sizes)`` items is held out once; the rest is a fixed
    evaluation set. Each size draws ``split.num_splits`` random subsets of
    the pool.
    """
    sizes = [int(x) for x in sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("sizes must be positive")
    pool_size = max(sizes)
    if pool_size + 1 > len(data):
        raise InsufficientData(f"largest size {pool_size} leaves no evaluation items of {len(data)}")
    perm = stream(split.seed, "sweep-pool").permutation(len(data))
    pool, ev = perm[:pool_size], np.sort(perm[pool_size:])
    ev_data = data.subset(ev)
    out = []
    for size in sizes:
        maes = []
        for s in range(split.num_splits):
            cal = np.sort(stream(split.seed, "sweep", size, s).choice(pool, size=size, replace=False))
            method = _fit_btd(data, cal, fit, smoothing, derive_seed(fit.seed, "sweep", size, s))
            maes.append(_mae_of(method, ev_data))
        out.append(SweepPoint(size, float(np.mean(maes)), ci_half_width(maes), tuple(maes)))
    return out


@dataclass(frozen=True)
class OrderBalance:
    first_only: float
    second_only: float
    balanced: float


def order_datasets(votes: Mapping[str, Sequence[VoteRecord]], gold: Mapping[str, int]):
    """Three views of the same items: AB votes only, BA votes only, and a
    half/half mix with the same budget (``ceil(m/2)`` AB plus ``floor(m/2)``
    BA, ``m`` the smaller per-order count).
    """
    first, second, balanced = {}, {}, {}
    for item_id, records in votes.items():
        ab = sorted((r for r in records if r.order == "AB"), key=lambda r: r.sample_index)
        ba = sorted((r for r in records if r.order == "BA"), key=lambda r: r.sample_index)
        if not ab or not ba:
            raise MissingOrder(f"item {item_id!r} lacks votes in order {'AB' if not ab else 'BA'}")
        m = min(len(ab), len(ba))
        first[item_id] = ab
        second[item_id] = ba
        balanced[item_id] = ab[: (m + 1) // 2] + ba[: m // 2]
    return build_dataset(first, gold), build_dataset(second, gold), build_dataset(balanced, gold)


def order_balance_report(votes: Mapping[str, Sequence[VoteRecord]], gold: Mapping[str, int],
                         method: Union[Method, str] = "btd", split: SplitConfig = SplitConfig(),
                         fit: FitConfig = FitConfig(), smoothing: Smoothing = Smoothing()) -> OrderBalance:
    """Mean split MAE of one aggregator under the three order layouts, using
    identical calibration/evaluation splits for each."""
    maes = []
    for data in order_datasets(votes, gold):
        run = run_splits(data, [method], split, fit, smoothing)
        maes.append(float(run.mae(run.method_ids[0]).mean()))
    return OrderBalance(*maes)
