from collections import Counter

import numpy as np
import pytest

from charlid.corpus import LabeledStream, LabelSet
from charlid.evaluation import (accuracy, confusion_pairs, multi_prf,
                                per_char_accuracy)
from charlid.numerics import DimensionError, Rng
from charlid.tasks import CharPrediction

LABELS = LabelSet(["aaa", "bbb", "ccc"])
TAGS = ["aaa", "bbb", "ccc", "ddd", "eee", "fff", "ggg", "hhh", "iii", "jjj"]


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy(["a", "b"], ["a", "b"]) == 1.0

    def test_half(self):
        assert accuracy(["A", "B"], ["A", "C"]) == 0.5

    def test_matches_counting_oracle(self):
        rng = Rng(50)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            golds = [TAGS[int(i)] for i in rng.integers(0, 5, n)]
            preds = [TAGS[int(i)] for i in rng.integers(0, 5, n)]
            want = sum(1 for g, p in zip(golds, preds) if g == p) / n
            assert accuracy(golds, preds) == want

    def test_self_is_one(self):
        g = ["x", "y", "z", "x"]
        assert accuracy(g, g) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            accuracy(["a"], ["a", "b"])


class TestPerCharAccuracy:
    def _case(self, gold, pred):
        stream = LabeledStream("x" * len(gold), np.asarray(gold, dtype=np.int32))
        return stream, CharPrediction(np.asarray(pred, dtype=np.int64), LABELS)

    def test_identical(self):
        s, p = self._case([0, 1, 2], [0, 1, 2])
        assert per_char_accuracy(s, p) == 1.0

    def test_disjoint(self):
        s, p = self._case([0, 0], [1, 2])
        assert per_char_accuracy(s, p) == 0.0

    def test_matches_counting_oracle(self):
        rng = Rng(51)
        for _ in range(200):
            n = int(rng.integers(1, 100))
            gold = rng.integers(0, 3, n)
            pred = rng.integers(0, 3, n)
            s, p = self._case(gold, pred)
            want = sum(int(a == b) for a, b in zip(gold, pred)) / n
            assert abs(per_char_accuracy(s, p) - want) < 1e-12

    def test_length_mismatch(self):
        s, _ = self._case([0, 1], [0, 1])
        with pytest.raises(DimensionError):
            per_char_accuracy(s, CharPrediction(np.zeros(3, dtype=np.int64), LABELS))


def tally_oracle(golds, preds):
    # independent from-scratch tally over documents and labels
    label_pool = set()
    for s in list(golds) + list(preds):
        label_pool |= s
    per_label = {}
    for lab in label_pool:
        tp = sum(1 for g, p in zip(golds, preds) if lab in g and lab in p)
        fp = sum(1 for g, p in zip(golds, preds) if lab not in g and lab in p)
        fn = sum(1 for g, p in zip(golds, preds) if lab in g and lab not in p)
        per_label[lab] = (tp, fp, fn)

    def prf(tp, fp, fn):
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return p, r, (2 * p * r / (p + r) if p + r else 0.0)

    scores = [prf(*v) for v in per_label.values()]
    n = max(len(scores), 1)
    p_macro = sum(s[0] for s in scores) / n
    r_macro = sum(s[1] for s in scores) / n
    f_macro = sum(s[2] for s in scores) / n
    tp = sum(v[0] for v in per_label.values())
    fp = sum(v[1] for v in per_label.values())
    fn = sum(v[2] for v in per_label.values())
    p_mu, r_mu, f_mu = prf(tp, fp, fn)
    return p_macro, r_macro, f_macro, p_mu, r_mu, f_mu


class TestMultiPrf:
    def test_perfect(self):
        golds = [{"aaa"}, {"bbb", "ccc"}]
        result = multi_prf(golds, [set(s) for s in golds])
        assert all(v == 1.0 for v in result.as_dict().values())

    def test_macro_f_is_mean_of_per_label_f(self):
        # label aaa: perfect (F=1); label bbb: P=1, R=1/3 -> F=0.5
        golds = [{"aaa", "bbb"}, {"bbb"}, {"bbb"}]
        preds = [{"aaa", "bbb"}, set(), set()]
        result = multi_prf(golds, preds)
        assert abs(result.f_macro - 0.75) < 1e-12

    def test_macro_f_not_harmonic_mean(self):
        # aaa: P=1, R=1/2; bbb: P=1/2, R=1 -> macro P = macro R = 3/4,
        # harmonic mean 3/4, but mean of per-label F scores is 2/3
        golds = [{"aaa"}, {"aaa"}, {"bbb"}, set()]
        preds = [{"aaa"}, set(), {"bbb"}, {"bbb"}]
        result = multi_prf(golds, preds)
        harmonic = (2 * result.precision_macro * result.recall_macro
                    / (result.precision_macro + result.recall_macro))
        assert abs(result.f_macro - harmonic) > 1e-6

    def test_micro_f_is_harmonic_of_micro_p_r(self):
        rng = Rng(52)
        golds, preds = _random_sets(rng, 50)
        result = multi_prf(golds, preds)
        if result.precision_micro + result.recall_micro > 0:
            want = (2 * result.precision_micro * result.recall_micro
                    / (result.precision_micro + result.recall_micro))
            assert abs(result.f_micro - want) < 1e-12

    def test_matches_independent_tally_oracle(self):
        rng = Rng(53)
        for _ in range(200):
            golds, preds = _random_sets(rng, int(rng.integers(1, 15)))
            result = multi_prf(golds, preds)
            want = tally_oracle(golds, preds)
            got = (result.precision_macro, result.recall_macro, result.f_macro,
                   result.precision_micro, result.recall_micro, result.f_micro)
            assert all(abs(a - b) < 1e-12 for a, b in zip(got, want))

    def test_relabeling_invariance(self):
        rng = Rng(54)
        golds, preds = _random_sets(rng, 40)
        mapping = dict(zip(TAGS, reversed(TAGS)))
        renamed = multi_prf([{mapping[t] for t in s} for s in golds],
                            [{mapping[t] for t in s} for s in preds])
        original = multi_prf(golds, preds)
        for a, b in zip(original.as_dict().values(), renamed.as_dict().values()):
            assert abs(a - b) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            multi_prf([{"aaa"}], [])


def _random_sets(rng, n):
    golds, preds = [], []
    for _ in range(n):
        golds.append({TAGS[int(i)] for i in rng.integers(0, 10, int(rng.integers(1, 4)))})
        preds.append({TAGS[int(i)] for i in rng.integers(0, 10, int(rng.integers(0, 4)))})
    return golds, preds


class TestConfusionPairs:
    def test_unordered_pair_counted(self):
        got = confusion_pairs(["A", "A", "B"], ["B", "B", "B"])
        assert got == [(("A", "B"), 2)]

    def test_all_correct_empty(self):
        assert confusion_pairs(["A", "B"], ["A", "B"]) == []

    def test_both_directions_pool(self):
        got = confusion_pairs(["A", "B"], ["B", "A"])
        assert got == [(("A", "B"), 2)]

    def test_sum_equals_error_count(self):
        rng = Rng(55)
        golds = [TAGS[int(i)] for i in rng.integers(0, 4, 500)]
        preds = [TAGS[int(i)] for i in rng.integers(0, 4, 500)]
        got = confusion_pairs(golds, preds, top_k=100)
        errors = sum(1 for g, p in zip(golds, preds) if g != p)
        assert sum(c for _, c in got) == errors

    def test_ordering_and_top_k(self):
        golds = ["A"] * 5 + ["C"] * 2 + ["E"] * 2
        preds = ["B"] * 5 + ["D"] * 2 + ["F"] * 2
        got = confusion_pairs(golds, preds, top_k=2)
        assert got == [(("A", "B"), 5), (("C", "D"), 2)]

    def test_matches_counting_oracle(self):
        rng = Rng(56)
        for _ in range(1000):
            n = int(rng.integers(1, 25))
            golds = [TAGS[int(i)] for i in rng.integers(0, 5, n)]
            preds = [TAGS[int(i)] for i in rng.integers(0, 5, n)]
            got = dict(confusion_pairs(golds, preds, top_k=1000))
            want = Counter(tuple(sorted((g, p)))
                           for g, p in zip(golds, preds) if g != p)
            assert got == dict(want)
