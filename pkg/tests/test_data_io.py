import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from judgecal.core import DavidsonParams, TernaryDistribution, VoteCounts
from judgecal.data_io import (ItemLabel, Prediction, VoteRecord, build_dataset, canonicalize,
                              confident_votes, gold_labels, read_labels, read_predictions, read_votes,
                              tally, write_labels, write_predictions, write_votes)
from judgecal.errors import (DuplicateLabel, EmptyInput, InsufficientData, MissingConfidence,
                             MixedItems, ParseError)
from judgecal.synthetic import GeneratorConfig, generate_synthetic, shift_for_order

record_st = st.builds(VoteRecord, st.just("x"), st.sampled_from(["AB", "BA"]),
                      st.sampled_from([-1, 0, 1]), st.none() | st.floats(0, 1), st.integers(0, 99))


class TestCanonicalize:
    @pytest.mark.parametrize("order,raw,want", [("BA", 1, -1), ("AB", -1, -1), ("BA", 0, 0),
                                                ("AB", 1, 1), ("BA", -1, 1)])
    def test_table(self, order, raw, want):
        assert canonicalize(VoteRecord("i", order, raw)) == want

    @given(record_st)
    def test_flip_twice_is_identity(self, rec):
        once = canonicalize(rec)
        assert canonicalize(VoteRecord(rec.item_id, rec.order, once)) == rec.raw_label
        other = "BA" if rec.order == "AB" else "AB"
        assert canonicalize(VoteRecord(rec.item_id, other, rec.raw_label)) == -once

    def test_record_validation(self):
        with pytest.raises(ValueError):
            VoteRecord("i", "CD", 1)
        with pytest.raises(ValueError):
            VoteRecord("i", "AB", 2)
        with pytest.raises(ValueError):
            VoteRecord("i", "AB", 1, confidence=1.2)
        with pytest.raises(ValueError):
            ItemLabel("i", 3)


class TestTally:
    def test_example(self):
        recs = [VoteRecord("i", "AB", 1), VoteRecord("i", "AB", 0),
                VoteRecord("i", "BA", 1), VoteRecord("i", "BA", -1)]
        assert tally(recs) == VoteCounts(c_plus=2, c_minus=1, c_tie=1)

    @pytest.mark.parametrize("n", [1, 5])
    def test_all_ties(self, n):
        assert tally([VoteRecord("i", "AB", 0)] * n) == VoteCounts(0, 0, n)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            tally([])
        with pytest.raises(MixedItems):
            tally([VoteRecord("a", "AB", 0), VoteRecord("b", "AB", 0)])

    @given(st.lists(record_st, min_size=1, max_size=20), st.randoms())
    def test_total_and_order_invariance(self, recs, rnd):
        c = tally(recs)
        assert c.n == len(recs)
        shuffled = list(recs)
        rnd.shuffle(shuffled)
        assert tally(shuffled) == c

    def test_confident_votes_requires_confidence(self):
        with pytest.raises(MissingConfidence):
            confident_votes([VoteRecord("i", "AB", 1, 0.5), VoteRecord("i", "BA", 1)])
        got = confident_votes([VoteRecord("i", "BA", 1, 0.25)])
        assert (got[0].label, got[0].confidence) == (-1, 0.25)


class TestFiles:
    def test_votes_round_trip(self, tmp_path):
        sd = generate_synthetic(GeneratorConfig(num_items=30, votes_per_item=5, seed=3))
        recs = sd.records()
        path = tmp_path / "votes.jsonl"
        write_votes(path, recs)
        back = read_votes(path)
        assert [r for item in back.values() for r in item] == recs
        assert list(back) == list(sd.item_ids)

    def test_labels_round_trip_with_raters(self, tmp_path):
        labels = [ItemLabel("a", 1, "R1"), ItemLabel("a", 0, "R2"), ItemLabel("b", -1, "R1")]
        path = tmp_path / "labels.jsonl"
        write_labels(path, labels)
        assert read_labels(path) == labels

    def test_predictions_round_trip(self, tmp_path):
        preds = [Prediction("a", 1, TernaryDistribution(0.1, 0.2, 0.7)), Prediction("b", 0)]
        path = tmp_path / "p.jsonl"
        write_predictions(path, preds)
        assert read_predictions(path) == preds

    def test_unknown_fields_ignored(self, tmp_path):
        path = tmp_path / "v.jsonl"
        path.write_text('{"item_id": "a", "order": "AB", "label": 1, "sample_index": 0, "extra": [1]}\n\n')
        assert read_votes(path)["a"][0] == VoteRecord("a", "AB", 1, None, 0)

    def test_grouping_keeps_file_order(self, tmp_path):
        path = tmp_path / "v.jsonl"
        rows = [("b", 0), ("a", 0), ("b", 1), ("a", 1)]
        path.write_text("".join(json.dumps({"item_id": i, "order": "AB", "label": 0, "sample_index": k}) + "\n"
                                for i, k in rows))
        got = read_votes(path)
        assert list(got) == ["b", "a"]
        assert [r.sample_index for r in got["b"]] == [0, 1]

    def test_bad_label_names_line(self, tmp_path):
        path = tmp_path / "v.jsonl"
        path.write_text('{"item_id": "a", "order": "AB", "label": 1, "sample_index": 0}\n'
                        '{"item_id": "a", "order": "AB", "label": 2, "sample_index": 1}\n')
        with pytest.raises(ParseError) as err:
            read_votes(path)
        assert err.value.line == 2
        assert ":2:" in str(err.value)

    @pytest.mark.parametrize("line", [
        "not json",
        "[1, 2]",
        '{"item_id": "a", "order": "XY", "label": 1, "sample_index": 0}',
        '{"item_id": "a", "order": "AB", "label": true, "sample_index": 0}',
        '{"item_id": "a", "order": "AB", "label": 1, "sample_index": -1}',
        '{"item_id": "a", "order": "AB", "label": 1, "confidence": 3, "sample_index": 0}',
        '{"order": "AB", "label": 1, "sample_index": 0}',
    ])
    def test_parse_errors(self, tmp_path, line):
        path = tmp_path / "v.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(ParseError):
            read_votes(path)

    def test_duplicate_label(self, tmp_path):
        path = tmp_path / "l.jsonl"
        path.write_text('{"item_id": "a", "label": 1}\n{"item_id": "a", "label": 0}\n')
        with pytest.raises(DuplicateLabel):
            read_labels(path)
        path.write_text('{"item_id": "a", "label": 1, "rater_id": "R1"}\n'
                        '{"item_id": "a", "label": 0, "rater_id": "R1"}\n')
        with pytest.raises(DuplicateLabel):
            read_labels(path)


class TestDataset:
    def test_gold_majority(self):
        labels = [ItemLabel("a", 1, "R1"), ItemLabel("a", 1, "R2"), ItemLabel("a", 0, "R3"),
                  ItemLabel("b", 1, "R1"), ItemLabel("b", -1, "R2")]
        assert gold_labels(labels) == {"a": 1, "b": 0}

    def test_missing_label_names_item(self):
        votes = {"a": [VoteRecord("a", "AB", 1)], "zz-7": [VoteRecord("zz-7", "AB", 0)]}
        with pytest.raises(InsufficientData, match="zz-7"):
            build_dataset(votes, {"a": 1})

    def test_build(self):
        votes = {"a": [VoteRecord("a", "AB", 1, 0.9), VoteRecord("a", "BA", 1, 0.8)]}
        data = build_dataset(votes, {"a": -1, "unused": 0})
        np.testing.assert_array_equal(data.counts, [[1, 0, 1]])
        assert data.truth.tolist() == [-1]
        assert data.votes == (((1, 0.9), (-1, 0.8)),)


class TestGenerator:
    def test_deterministic(self):
        cfg = GeneratorConfig(num_items=200, order_bias=0.2, seed=42)
        a, b = generate_synthetic(cfg), generate_synthetic(cfg)
        for name in ("judge_probs", "raw_labels", "canonical", "confidence", "counts", "truth", "true_dist"):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        c = generate_synthetic(GeneratorConfig(num_items=200, order_bias=0.2, seed=43))
        assert not np.array_equal(a.canonical, c.canonical)

    def test_orders_split(self):
        sd = generate_synthetic(GeneratorConfig(num_items=5, votes_per_item=7))
        assert (sd.orders == 0).sum(axis=1).tolist() == [4] * 5
        np.testing.assert_array_equal(sd.raw_labels, np.where(sd.orders == 0, sd.canonical, -sd.canonical))
        assert np.all(sd.counts.sum(axis=1) == 7)

    def test_truth_law_binned(self):
        theta = DavidsonParams(1.0, 1.0, 1.0)
        sd = generate_synthetic(GeneratorConfig(theta, 50_000, 20, seed=5))
        s, t = sd.features
        s_bin = np.digitize(s, np.quantile(s, [1 / 3, 2 / 3]))
        t_bin = np.digitize(t, np.quantile(t, [1 / 3, 2 / 3]))
        checked = 0
        for i in range(3):
            for j in range(3):
                m = (s_bin == i) & (t_bin == j)
                if m.sum() < 500:
                    continue
                p = sd.true_dist[m]
                for k, lab in enumerate((-1, 0, 1)):
                    se = np.sqrt(np.sum(p[:, k] * (1 - p[:, k]))) / m.sum()
                    freq = np.mean(sd.truth[m] == lab)
                    assert abs(freq - p[:, k].mean()) <= 3 * se
                    checked += 1
        assert checked >= 15

    def test_sign_agreement_when_sharp(self):
        sd = generate_synthetic(GeneratorConfig(DavidsonParams(5.0, 1e-4, 0.0), 10_000, 20, seed=1))
        s, _ = sd.features
        m = np.abs(s) > 1
        assert m.sum() > 500
        assert np.mean(sd.truth[m] == np.sign(s[m])) > 0.95

    def test_tie_rate_matches_closed_form(self):
        sd = generate_synthetic(GeneratorConfig(DavidsonParams(1.0, 1e3, 0.0), 10_000, 12, seed=2))
        assert abs(np.mean(sd.truth == 0) - sd.true_dist[:, 1].mean()) <= 0.02

    def test_no_bias_orders_indistinguishable(self):
        sd = generate_synthetic(GeneratorConfig(num_items=10_000, votes_per_item=12, seed=7))
        table = [[np.sum(sd.canonical[sd.orders == o] == lab) for lab in (-1, 0, 1)] for o in (0, 1)]
        assert chi2_contingency(table).pvalue > 0.01

    def test_bias_shifts_ab_toward_plus(self):
        sd = generate_synthetic(GeneratorConfig(num_items=5000, votes_per_item=12, order_bias=0.3, seed=7))
        ab = sd.canonical[sd.orders == 0]
        ba = sd.canonical[sd.orders == 1]
        assert ab.mean() > ba.mean() + 0.2

    def test_mirrored_concentration(self):
        a = generate_synthetic(GeneratorConfig(num_items=20_000, dirichlet_concentration=(3.0, 2.0, 1.0), seed=1))
        b = generate_synthetic(GeneratorConfig(num_items=20_000, dirichlet_concentration=(1.0, 2.0, 3.0), seed=2))
        np.testing.assert_allclose(a.counts.mean(axis=0), b.counts.mean(axis=0)[::-1], atol=0.1)

    def test_shift_for_order(self):
        q = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(shift_for_order(q, 0.1, 1), [0.1, 0.3, 0.6])
        np.testing.assert_allclose(shift_for_order(q, 0.1, -1), [0.3, 0.3, 0.4])
        out = shift_for_order(q, 0.4, 1)
        assert np.all(out >= 0) and out.sum() == pytest.approx(1.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GeneratorConfig(num_items=0)
        with pytest.raises(ValueError):
            GeneratorConfig(order_bias=1.5)
        with pytest.raises(ValueError):
            GeneratorConfig(dirichlet_concentration=(1.0, 0.0, 1.0))

    def test_bayes_mae(self):
        sd = generate_synthetic(GeneratorConfig(num_items=100, seed=0))
        p = sd.true_dist
        want = np.mean([min(p0 + 2 * pp, pp + pm, 2 * pm + p0) for pm, p0, pp in p])
        assert sd.bayes_mae() == pytest.approx(want, abs=1e-12)
