from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charlid.corpus import LabelSet, build_vocab
from charlid.network import ModelConfig, init_params
from charlid.numerics import Rng
from charlid.tasks import (CharPrediction, InputError, classify_document,
                           detect_languages, partition_text, predict_chars)

LABELS = LabelSet(["aaa", "bbb", "ccc", "ddd"])


def pred_of(indices):
    return CharPrediction(np.asarray(indices, dtype=np.int64), LABELS)


@pytest.fixture(scope="module")
def small_model():
    vocab = build_vocab(["abcdefghij klmnop"])
    config = ModelConfig(vocab_size=vocab.size, label_count=len(LABELS),
                         embed_dim=6, hidden_dim=8, window=20, precision=64)
    params = init_params(config, Rng(100))
    return params, config, vocab


class TestPredictChars:
    @pytest.mark.parametrize("n", [1, 19, 20, 21, 400])
    def test_length_preserved(self, small_model, n):
        params, config, vocab = small_model
        text = ("abcdefghij" * (n // 10 + 1))[:n]
        pred = predict_chars(params, config, vocab, LABELS, text)
        assert len(pred) == n

    def test_empty_text_rejected(self, small_model):
        params, config, vocab = small_model
        with pytest.raises(InputError):
            predict_chars(params, config, vocab, LABELS, "")

    def test_restrict_to_single_tag(self, small_model):
        params, config, vocab = small_model
        pred = predict_chars(params, config, vocab, LABELS, "abc def",
                             restrict_to=["ccc"])
        assert all(LABELS.tag(i) == "ccc" for i in pred.labels)

    def test_restricted_pair_is_complementary(self, small_model):
        params, config, vocab = small_model
        pred = predict_chars(params, config, vocab, LABELS, "abcdefg hij",
                             restrict_to=["aaa", "bbb"], keep_posteriors=True)
        pair = pred.posteriors[:, [LABELS.index("aaa"), LABELS.index("bbb")]]
        assert np.allclose(pair.sum(axis=1), 1.0, atol=1e-9)
        others = np.delete(pred.posteriors, [0, 1], axis=1)
        assert not others.any()

    def test_unknown_restriction_tag(self, small_model):
        params, config, vocab = small_model
        with pytest.raises(KeyError):
            predict_chars(params, config, vocab, LABELS, "abc",
                          restrict_to=["zzz"])

    def test_restriction_monotonicity(self, small_model):
        # superset containing the free argmax leaves the argmax unchanged
        params, config, vocab = small_model
        text = "abcde fghij klm"
        free = predict_chars(params, config, vocab, LABELS, text)
        restricted = predict_chars(params, config, vocab, LABELS, text,
                                   restrict_to=list(LABELS.tags))
        assert np.array_equal(free.labels, restricted.labels)


class TestClassifyDocument:
    def test_majority(self):
        assert classify_document(pred_of([0, 0, 1])) == "aaa"

    def test_tie_breaks_to_lower_index(self):
        assert classify_document(pred_of([1, 1, 0, 0])) == "aaa"
        assert classify_document(pred_of([3, 3, 2, 2])) == "ccc"

    def test_matches_counting_oracle(self):
        rng = Rng(31)
        for _ in range(1000):
            labels = rng.integers(0, 4, int(rng.integers(1, 40)))
            got = classify_document(pred_of(labels))
            counts = Counter(int(x) for x in labels)
            best = max(counts, key=lambda k: (counts[k], -k))
            assert got == LABELS.tag(best)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            classify_document(pred_of([]))


class TestDetectLanguages:
    def test_exact_threshold_excluded(self):
        labels = [0] * 97 + [1] * 3
        result = detect_languages(pred_of(labels), threshold=0.03)
        assert result.tags == {"aaa"}

    def test_even_split(self):
        result = detect_languages(pred_of([0, 1] * 10))
        assert result.tags == {"aaa", "bbb"}

    def test_fractions_sum_to_one(self):
        result = detect_languages(pred_of([0, 1, 1, 2]))
        assert abs(sum(result.fractions.values()) - 1.0) < 1e-12

    def test_threshold_zero_returns_all_present(self):
        labels = [0, 0, 2]
        result = detect_languages(pred_of(labels), threshold=0.0)
        assert result.tags == {"aaa", "ccc"}

    def test_matches_counting_oracle(self):
        rng = Rng(32)
        for _ in range(1000):
            labels = rng.integers(0, 4, int(rng.integers(1, 60)))
            got = detect_languages(pred_of(labels), threshold=0.03).tags
            counts = Counter(int(x) for x in labels)
            want = {LABELS.tag(k) for k, c in counts.items()
                    if c / len(labels) > 0.03}
            assert got == want


def spans_oracle(labels):
    spans = []
    for i, lab in enumerate(labels):
        if spans and spans[-1][2] == lab:
            spans[-1][1] = i + 1
        else:
            spans.append([i, i + 1, lab])
    return [(s, e, LABELS.tag(l)) for s, e, l in spans]


class TestPartitionText:
    def test_basic_runs(self):
        report = partition_text(pred_of([0, 0, 1, 1, 1, 0]))
        assert report.spans == [(0, 2, "aaa"), (2, 5, "bbb"), (5, 6, "aaa")]

    def test_uniform_single_span(self):
        report = partition_text(pred_of([2] * 9))
        assert report.spans == [(0, 9, "ccc")]

    def test_min_span_merges_short_island(self):
        report = partition_text(pred_of([0, 0, 1, 0, 0]), min_span=3)
        assert report.spans == [(0, 5, "aaa")]

    def test_min_span_exhaustive_small_cases(self):
        # every 2-label sequence up to length 6: invariants must survive merging
        for n in range(1, 7):
            for code in range(2 ** n):
                labels = [(code >> i) & 1 for i in range(n)]
                report = partition_text(pred_of(labels), min_span=2)
                assert report.spans[0][0] == 0
                assert report.spans[-1][1] == n
                for (s1, e1, t1), (s2, e2, t2) in zip(report.spans,
                                                      report.spans[1:]):
                    assert e1 == s2
                    assert t1 != t2
                if len(report.spans) > 1:
                    assert all(e - s >= 2 for s, e, _ in report.spans)

    def test_matches_run_oracle(self):
        rng = Rng(33)
        for _ in range(500):
            labels = rng.integers(0, 4, int(rng.integers(1, 50)))
            report = partition_text(pred_of(labels))
            assert report.spans == spans_oracle([int(x) for x in labels])

    def test_majority_equals_classify(self):
        rng = Rng(34)
        for _ in range(200):
            labels = rng.integers(0, 4, int(rng.integers(1, 80)))
            pred = pred_of(labels)
            report = partition_text(pred)
            mass = Counter()
            for s, e, tag in report.spans:
                mass[tag] += e - s
            best = max(mass, key=lambda t: (mass[t], -LABELS.index(t)))
            assert best == classify_document(pred)


@given(st.lists(st.integers(min_value=0, max_value=3), min_size=1, max_size=120),
       st.integers(min_value=1, max_value=5))
@settings(max_examples=300, deadline=None)
def test_span_invariants_property(labels, min_span):
    report = partition_text(pred_of(labels), min_span=min_span)
    assert report.spans[0][0] == 0
    assert report.spans[-1][1] == len(labels)
    for (s1, e1, t1), (s2, e2, t2) in zip(report.spans, report.spans[1:]):
        assert e1 == s2
        assert t1 != t2
