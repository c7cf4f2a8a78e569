"""Metrics: accuracy, micro/macro P/R/F over language sets, confusion pairs.

Macro-F is the plain mean of the per-label F scores, not the harmonic
mean of macro-P and macro-R, so it can fall outside the [P_M, R_M]
range.  Micro scores are computed from pooled counts.
"""

from collections import Counter
from dataclasses import dataclass, field

from .numerics import DimensionError


@dataclass
class MultiEvalResult:
    precision_macro: float
    recall_macro: float
    f_macro: float
    precision_micro: float
    recall_micro: float
    f_micro: float
    per_label: dict = field(default_factory=dict)  # tag -> (tp, fp, fn)

    def as_dict(self):
        return {
            "P_macro": self.precision_macro, "R_macro": self.recall_macro,
            "F_macro": self.f_macro, "P_micro": self.precision_micro,
            "R_micro": self.recall_micro, "F_micro": self.f_micro,
        }


def _check_lengths(golds, preds):
    if len(golds) != len(preds):
        raise DimensionError(f"gold/pred length mismatch: {len(golds)} vs {len(preds)}")
    if len(golds) == 0:
        raise DimensionError("empty evaluation input")


def accuracy(golds, preds):
    """Fraction of exact matches."""
    _check_lengths(golds, preds)
    return sum(g == p for g, p in zip(golds, preds)) / len(golds)


def per_char_accuracy(gold_stream, pred):
    """Fraction of characters whose predicted label matches the gold label."""
    gold = gold_stream.labels
    if len(gold) != len(pred.labels):
        raise DimensionError(
            f"stream has {len(gold)} chars but prediction has {len(pred.labels)}")
    return float((gold == pred.labels).mean())


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def multi_prf(golds, preds):
    """Micro/macro precision, recall and F over per-document language sets.

    golds and preds are parallel lists of tag sets (LanguageSet.tags or
    plain sets).  Macro averages run over labels that occur in at least
    one gold or predicted set.
    """
    _check_lengths(golds, preds)
    tallies = {}
    for g, p in zip(golds, preds):
        g = getattr(g, "tags", g)
        p = getattr(p, "tags", p)
        for tag in g | p:
            tp, fp, fn = tallies.get(tag, (0, 0, 0))
            tp += tag in g and tag in p
            fp += tag in p and tag not in g
            fn += tag in g and tag not in p
            tallies[tag] = (tp, fp, fn)

    ps, rs, fs = [], [], []
    for tag in tallies:
        p, r, f = _prf(*tallies[tag])
        ps.append(p)
        rs.append(r)
        fs.append(f)
    n = max(len(tallies), 1)
    tp = sum(t[0] for t in tallies.values())
    fp = sum(t[1] for t in tallies.values())
    fn = sum(t[2] for t in tallies.values())
    p_mu, r_mu, f_mu = _prf(tp, fp, fn)
    return MultiEvalResult(sum(ps) / n, sum(rs) / n, sum(fs) / n,
                           p_mu, r_mu, f_mu, tallies)


def confusion_pairs(golds, preds, top_k=20):
    """Most frequent unordered {gold, predicted} tag pairs among errors.

    Returns [(tag_a, tag_b), count] entries sorted by count descending,
    ties in lexicographic pair order; tag_a < tag_b within a pair.
    """
    _check_lengths(golds, preds)
    counts = Counter(tuple(sorted((g, p)))
                     for g, p in zip(golds, preds) if g != p)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]
