import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from judgecal.core import DavidsonParams
from judgecal.data_io import VoteRecord
from judgecal.errors import EmptyInput, InsufficientData, LengthMismatch, MissingOrder, TooFewRaters
from judgecal.metaeval import (BTD, FixedBTD, LabeledPrediction, SelfConsistency, SignificanceConfig,
                               SplitConfig, calibration_size_sweep, ci_half_width, cluster_ranks,
                               confusion_report, leave_one_out, mae, order_balance_report,
                               paired_permutation_test, pairwise_accuracy, pooled_permutation_test,
                               run_splits, summarize, top_cluster, transfer_matrix)
from judgecal.synthetic import GeneratorConfig, generate_synthetic

labels = st.sampled_from([-1, 0, 1])


def lp(pairs):
    return [LabeledPrediction(f"i{k}", p, t) for k, (p, t) in enumerate(pairs)]


def synth(theta=(1.0, 10.0, 1.0), items=1000, votes=12, seed=0, conc=(2.0, 1.0, 2.0), bias=0.0):
    return generate_synthetic(GeneratorConfig(DavidsonParams(*theta), items, votes, conc, bias, seed))


class TestMetrics:
    def test_mae_examples(self):
        assert mae(lp([(-1, 1), (1, 1)])) == 1.0
        assert mae(lp([(0, 0), (1, 1)])) == 0.0
        assert mae(lp([(0, 1), (0, -1)])) == 1.0

    def test_pa_examples(self):
        assert pairwise_accuracy(lp([(-1, 1), (1, 1)])) == 0.5
        assert pairwise_accuracy(lp([(1, 1), (-1, -1)])) == 1.0
        assert pairwise_accuracy(lp([(0, 1), (0, 0), (1, 1), (-1, 0)])) == 0.5

    def test_empty(self):
        with pytest.raises(EmptyInput):
            mae([])
        with pytest.raises(EmptyInput):
            pairwise_accuracy([])
        with pytest.raises(EmptyInput):
            confusion_report([])

    @given(st.lists(st.tuples(labels, labels), min_size=1, max_size=30), st.randoms())
    def test_properties(self, pairs, rnd):
        preds = lp(pairs)
        m, a = mae(preds), pairwise_accuracy(preds)
        assert 0.0 <= m <= 2.0
        assert (m == 0.0) == (a == 1.0)
        rnd.shuffle(preds)
        assert mae(preds) == pytest.approx(m, abs=1e-15)
        assert pairwise_accuracy(preds) == pytest.approx(a, abs=1e-15)

    def test_confusion(self):
        rep = confusion_report(lp([(-1, -1), (0, 0), (0, 0), (1, 1)]))
        np.testing.assert_array_equal(rep.counts, np.diag([1, 2, 1]))
        np.testing.assert_array_equal(rep.predicted_histogram, [1, 2, 1])
        one = confusion_report(lp([(1, -1)]))
        assert one.counts[0, 2] == 1 and one.counts.sum() == 1
        assert one.row_percent[0, 2] == 100.0
        assert one.row_percent[1].sum() == 0.0

    def test_ci_half_width(self):
        assert ci_half_width([0.5]) == 0.0
        v = [1.0, 2.0, 3.0, 4.0]
        assert ci_half_width(v) == pytest.approx(1.96 * np.std(v, ddof=1) / 2)


class TestPermutation:
    def test_identical_losses(self):
        a = np.array([0.0, 1.0, 2.0, 1.0])
        assert paired_permutation_test(a, a) == 1.0

    def test_single_difference(self):
        a = np.zeros(30)
        b = a.copy()
        b[7] = 2.0
        assert paired_permutation_test(a, b, SignificanceConfig(100)) == 1.0

    def test_clear_difference_is_significant(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=200)
        assert paired_permutation_test(a, a + 1.0) == pytest.approx(1 / 101)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            paired_permutation_test([1.0, 2.0], [1.0])
        with pytest.raises(EmptyInput):
            pooled_permutation_test([])

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=40),
           st.integers(0, 2**32 - 1))
    def test_range_and_symmetry(self, pairs, seed):
        a = np.array([x for x, _ in pairs], dtype=float)
        b = np.array([y for _, y in pairs], dtype=float)
        cfg = SignificanceConfig(50, 0.05, seed)
        p = paired_permutation_test(a, b, cfg)
        assert 0.0 < p <= 1.0
        assert p == paired_permutation_test(b, a, cfg)

    def test_pooled_uses_all_splits(self):
        diffs = [np.ones(5), -np.ones(5)]
        # pooled observed mean is 0, so every resample hits
        assert pooled_permutation_test(diffs) == 1.0


class TestTopCluster:
    def test_single(self):
        assert top_cluster([("a", 0.3)], {}) == {"a"}

    def test_not_significant(self):
        assert top_cluster([("a", 0.3), ("b", 0.4)], {("a", "b"): 0.5}) == {"a", "b"}

    def test_first_violation_stops(self):
        means = [("C", 0.5), ("A", 0.1), ("B", 0.2)]
        p = {("A", "B"): 0.3, ("A", "C"): 0.01, ("B", "C"): 0.9}
        assert top_cluster(means, p) == {"A", "B"}
        assert cluster_ranks(means, p) == {"A": 1, "B": 1, "C": 2}

    def test_higher_is_better(self):
        means = [("a", 0.9), ("b", 0.5)]
        assert top_cluster(means, {("b", "a"): 0.001}, higher_is_better=True) == {"a"}

    def test_violation_against_any_member(self):
        means = [("A", 0.1), ("B", 0.2), ("C", 0.3), ("D", 0.4)]
        p = {("A", "B"): 0.5, ("A", "C"): 0.5, ("B", "C"): 0.01, ("A", "D"): 0.5,
             ("B", "D"): 0.5, ("C", "D"): 0.5}
        assert top_cluster(means, p) == {"A", "B"}

    @given(st.lists(st.floats(0, 2), min_size=1, max_size=6), st.lists(st.floats(0, 1), min_size=15, max_size=15))
    def test_contains_best(self, vals, ps):
        means = [(f"m{i}", v) for i, v in enumerate(vals)]
        pm = {}
        k = 0
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                pm[(f"m{i}", f"m{j}")] = ps[k]
                k += 1
        best = min(means, key=lambda kv: kv[1])
        cluster = top_cluster(means, pm)
        assert any(dict(means)[m] == best[1] for m in cluster)


class TestSplits:
    def test_deterministic_and_order_invariant(self):
        data = synth(items=400).dataset()
        split = SplitConfig(0.1, 4, seed=3)
        a = run_splits(data, ["btd", "sc"], split)
        b = run_splits(data, ["btd", "sc"], split)
        c = run_splits(data, ["sc", "btd"], split)
        for m in ("btd", "sc"):
            np.testing.assert_array_equal(a.mae(m), b.mae(m))
            np.testing.assert_array_equal(a.mae(m), c.mae(m))
        assert a.params["btd"] == c.params["btd"]

    def test_sc_matches_pooled(self):
        data = synth(items=300).dataset()
        run = run_splits(data, ["sc"], SplitConfig(0.05, 3))
        sc_all = SelfConsistency().predict(data)
        for s in range(3):
            ev = run.evaluation[s]
            assert run.mae("sc")[s] == pytest.approx(np.mean(np.abs(sc_all[ev] - data.truth[ev])))
            assert len(run.calibration[s]) == 15
            assert len(np.intersect1d(run.calibration[s], ev)) == 0

    def test_btd_beats_sc_when_well_specified(self):
        run = run_splits(synth().dataset(), ["btd", "sc"], SplitConfig(0.05, 20))
        assert run.mae("btd").mean() < run.mae("sc").mean()

    def test_insufficient(self):
        data = synth(items=10).dataset()
        with pytest.raises(InsufficientData):
            run_splits(data, ["sc"], SplitConfig(0.01, 1))

    def test_summary(self):
        run = run_splits(synth(items=300).dataset(), ["btd", "sc", "sc"], SplitConfig(0.1, 5))
        assert run.method_ids == ["btd", "sc", "sc#2"]
        summary = summarize(run, SignificanceConfig(20))
        d = summary.to_dict()
        by = {m["method_id"]: m for m in d["methods"]}
        assert by["sc"]["mae"] == by["sc#2"]["mae"]
        assert by["sc"]["mae_rank"] == by["sc#2"]["mae_rank"]
        assert d["p_values"]["mae"]["sc"]["sc#2"] == 1.0
        assert min(m["mae_rank"] for m in d["methods"]) == 1

    def test_fixed_btd_needs_no_fit(self):
        data = synth(items=50).dataset()
        out = FixedBTD(DavidsonParams(1.0, 1.0, 1.0)).predict(data)
        assert out.shape == (50,)
        with pytest.raises(RuntimeError):
            BTD().predict(data)


class TestLeaveOneOut:
    def test_identical_raters(self):
        h = np.array([[1, 1, 1], [0, 0, 0], [-1, -1, -1]])
        rows = leave_one_out(h, [1, 0, -1])
        assert all(r.human_pa == 1.0 and r.system_pa == 1.0 and not r.win for r in rows)

    def test_four_item_fixture(self):
        h = np.array([[1, 1, 1], [0, 0, 0], [1, -1, -1], [0, 1, 1]])
        rows = leave_one_out(h, [1, 0, -1, 1], ["R1", "R2", "R3"])
        r1 = rows[0]
        assert (r1.rater, r1.human_pa, r1.system_pa, r1.win) == ("R1", 0.5, 1.0, True)

    def test_held_out_never_used(self):
        rng = np.random.default_rng(1)
        h = rng.integers(-1, 2, size=(40, 4)).astype(float)
        sys_pred = rng.integers(-1, 2, size=40)
        base = leave_one_out(h, sys_pred)
        for i in range(4):
            h2 = h.copy()
            h2[:, i] = rng.integers(-1, 2, size=40)
            # rater i's ground truth is built from the others only
            assert leave_one_out(h2, sys_pred)[i].system_pa == base[i].system_pa

    def test_eight_raters(self):
        rng = np.random.default_rng(2)
        h = rng.integers(-1, 2, size=(30, 8))
        rows = leave_one_out(h, rng.integers(-1, 2, size=30))
        assert len(rows) == 8
        assert 0 <= sum(r.win for r in rows) <= 8

    def test_missing_entries(self):
        h = np.array([[1, 1, np.nan], [0, np.nan, 0], [1, 1, 1]])
        rows = leave_one_out(h, [1, 0, 1])
        assert rows[2].items == 2

    def test_errors(self):
        with pytest.raises(TooFewRaters):
            leave_one_out(np.zeros((3, 2)), [0, 0, 0])
        with pytest.raises(LengthMismatch):
            leave_one_out(np.zeros((3, 3)), [0, 0])


class TestTransfer:
    def test_identical_theta(self):
        tasks = [synth(items=2000, seed=s).dataset() for s in (1, 2)]
        m = transfer_matrix(tasks, SplitConfig(0.05, 10))
        assert np.all(np.diag(m) == 0.0)
        assert np.all(np.abs(m) <= 0.01)

    def test_regime_mismatch(self):
        low = synth(theta=(1.0, 1.0, 1.0), items=2000, seed=1, conc=(2, 2, 2)).dataset()
        high = synth(theta=(1.0, 1000.0, 1.0), items=2000, seed=2, conc=(2, 2, 2)).dataset()
        m = transfer_matrix([low, high], SplitConfig(0.05, 5))
        assert m[0, 1] > 0.0

    def test_needs_two(self):
        with pytest.raises(InsufficientData):
            transfer_matrix([synth(items=50).dataset()])


class TestSweep:
    def test_large_calibration_reaches_bayes(self):
        sd = synth(items=40_000, votes=4, seed=3)
        (pt,) = calibration_size_sweep(sd.dataset(), [20_000], SplitConfig(0.05, 1, seed=3))
        assert abs(pt.mean_mae - sd.bayes_mae()) <= 0.01

    def test_shape(self):
        data = synth(items=600, votes=4).dataset()
        pts = calibration_size_sweep(data, [30], SplitConfig(0.05, 3))
        assert len(pts) == 1 and pts[0].size == 30 and len(pts[0].maes) == 3

    def test_trend(self):
        data = synth(items=3000, votes=4, seed=1).dataset()
        small, large = calibration_size_sweep(data, [20, 200], SplitConfig(0.05, 20, seed=1))
        assert large.mean_mae <= small.mean_mae + 0.005

    def test_errors(self):
        data = synth(items=50).dataset()
        with pytest.raises(InsufficientData):
            calibration_size_sweep(data, [50], SplitConfig())
        with pytest.raises(ValueError):
            calibration_size_sweep(data, [], SplitConfig())


def grouped(sd):
    votes = {}
    for r in sd.records():
        votes.setdefault(r.item_id, []).append(r)
    return votes, {lab.item_id: lab.truth for lab in sd.labels()}


class TestOrderBalance:
    def test_zero_bias_equal(self):
        # the three views are exchangeable; 20k items keep the noise well inside 0.01
        sd = synth(theta=(1.0, 1.0, 1.0), items=20_000, votes=24, seed=2, conc=(2, 2, 2))
        ob = order_balance_report(*grouped(sd), "btd", SplitConfig(0.05, 5, seed=2))
        vals = [ob.first_only, ob.second_only, ob.balanced]
        assert all(abs(v - np.mean(vals)) <= 0.01 for v in vals)

    def test_bias_favors_balanced(self):
        sd = synth(theta=(1.0, 1.0, 1.0), items=1000, votes=24, seed=5, conc=(2, 2, 2), bias=0.3)
        ob = order_balance_report(*grouped(sd), "btd", SplitConfig(0.05, 5, seed=5))
        assert ob.balanced <= min(ob.first_only, ob.second_only) + 0.005

    def test_missing_order(self):
        votes = {"a": [VoteRecord("a", "AB", 1, None, 0)], "b": [VoteRecord("b", "AB", 1, None, 0),
                                                               VoteRecord("b", "BA", 1, None, 1)]}
        with pytest.raises(MissingOrder, match="'a'"):
            order_balance_report(votes, {"a": 1, "b": 1})
