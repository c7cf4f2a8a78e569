"""Decision layers on top of per-character posteriors.

A text is windowed, run through the network, and the padded tail is
stripped, giving one label (and optionally one posterior row) per input
character.  From that sequence we derive a document label (majority
vote), the set of languages present (character-fraction threshold) and
contiguous language spans.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import LabelSet, window_ids
from .network import forward_batch


class InputError(ValueError):
    """Unusable task input (e.g. empty text)."""


@dataclass
class CharPrediction:
    """Per-character argmax labels; posteriors kept only on request."""
    labels: np.ndarray                    # (n,) int label indices
    label_set: LabelSet
    posteriors: Optional[np.ndarray] = None  # (n, label_count) when retained

    def __len__(self):
        return len(self.labels)


@dataclass
class LanguageSet:
    tags: set
    fractions: dict  # tag -> fraction of characters, over all predicted tags


@dataclass
class SpanReport:
    """Contiguous non-overlapping spans covering [0, len)."""
    spans: list  # (start, end, tag) with end exclusive
    length: int


def predict_chars(params, config, vocab, labels, text, restrict_to=None,
                  keep_posteriors=False, batch_size=64):
    """Label every character of text.

    restrict_to limits the prediction to a subset of tags: posteriors are
    renormalized over the subset and the argmax taken within it, which is
    how a known candidate set is enforced at evaluation time.
    """
    if not text:
        raise InputError("cannot predict on empty text")
    ids = vocab.encode(text)
    windows = window_ids(ids, np.zeros(len(ids), dtype=np.int32), config.window)

    allowed = None
    if restrict_to is not None:
        allowed = sorted(labels.index(t) for t in restrict_to)
        if not allowed:
            raise InputError("restrict_to must name at least one tag")

    pred_chunks = []
    post_chunks = []
    for start in range(0, len(windows), batch_size):
        group = windows[start:start + batch_size]
        ids = np.stack([w[0] for w in group])
        masks = np.stack([w[2] for w in group])
        trace = forward_batch(params, config, ids, train_mode=False)
        post = trace.posteriors
        if allowed is not None:
            sub = post[:, :, allowed]
            sub = sub / np.maximum(sub.sum(axis=-1, keepdims=True), 1e-30)
            arg = np.take(allowed, np.argmax(sub, axis=-1))
            full = np.zeros_like(post)
            full[:, :, allowed] = sub
            post = full
        else:
            arg = np.argmax(post, axis=-1)
        keep = masks.astype(bool)
        pred_chunks.append(arg[keep])
        if keep_posteriors:
            post_chunks.append(post[keep])
    all_labels = np.concatenate(pred_chunks)
    posteriors = np.concatenate(post_chunks) if keep_posteriors else None
    return CharPrediction(all_labels, labels, posteriors)


def classify_document(pred):
    """Majority-vote document label; ties go to the lowest label index."""
    if len(pred) == 0:
        raise InputError("empty prediction")
    counts = np.bincount(pred.labels, minlength=len(pred.label_set))
    return pred.label_set.tag(int(np.argmax(counts)))


def detect_languages(pred, threshold=0.03):
    """Languages covering strictly more than the threshold fraction of characters."""
    if len(pred) == 0:
        raise InputError("empty prediction")
    counts = np.bincount(pred.labels, minlength=len(pred.label_set))
    fractions = counts / len(pred)
    tags = {pred.label_set.tag(i) for i in np.nonzero(fractions > threshold)[0]}
    fraction_map = {pred.label_set.tag(i): float(f)
                    for i, f in enumerate(fractions) if f > 0}
    return LanguageSet(tags, fraction_map)


def partition_text(pred, min_span=1):
    """Split the prediction into maximal same-label spans.

    With min_span > 1, spans shorter than the minimum are merged into the
    longer adjacent neighbor (left neighbor on ties), repeatedly until no
    short span remains.
    """
    if len(pred) == 0:
        raise InputError("empty prediction")
    labels = pred.labels
    spans = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            spans.append([start, i, int(labels[start])])
            start = i

    if min_span > 1:
        spans = _merge_short_spans(spans, min_span)

    return SpanReport([(s, e, pred.label_set.tag(l)) for s, e, l in spans],
                      len(labels))


def _merge_short_spans(spans, min_span):
    while len(spans) > 1:
        lengths = [e - s for s, e, _ in spans]
        shortest = min(range(len(spans)), key=lambda i: (lengths[i], i))
        if lengths[shortest] >= min_span:
            break
        left = lengths[shortest - 1] if shortest > 0 else -1
        right = lengths[shortest + 1] if shortest + 1 < len(spans) else -1
        target = shortest - 1 if left >= right else shortest + 1
        lo, hi = min(shortest, target), max(shortest, target)
        merged = [spans[lo][0], spans[hi][1], spans[target][2]]
        spans[lo:hi + 1] = [merged]
        # absorbing a span can make its neighbors equal; re-coalesce
        i = 1
        while i < len(spans):
            if spans[i][2] == spans[i - 1][2]:
                spans[i - 1][1] = spans[i][1]
                del spans[i]
            else:
                i += 1
    return spans
