"""Bit-exact binary model files.

Layout (all integers unsigned 32-bit little-endian, floats 32-bit LE):

    magic "LNDN" | version | embed_dim | hidden_dim | window
    | vocab_size | label_count | keep_prob (f32)
    | vocab codepoint count | codepoints (u32 each, index order from 2)
    | label count | per tag: byte length (u32) + UTF-8 bytes
    | parameter tensors, f32 row-major, in ModelParams.tensors() order

vocab_size counts the two reserved entries (PAD, UNK), so it equals the
codepoint count plus 2.  Tensor shapes are implied by the header; the
loader checks the byte arithmetic against the real file size before it
builds any array.
"""

import struct

import numpy as np

from .corpus import LabelSet, Vocabulary
from .network import GruBlock, ModelConfig, ModelParams

MAGIC = b"LNDN"
VERSION = 1

# refuse headers implying absurd allocations
MAX_CODEPOINT = 0x110000
MAX_DIM = 1_000_000


class ModelFileError(ValueError):
    """Base for unreadable model files."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagicError(ModelFileError):
    pass


class VersionError(ModelFileError):
    pass


class TruncatedError(ModelFileError):
    pass


class SizeError(ModelFileError):
    pass


def _param_counts(config):
    e, h, v, l = (config.embed_dim, config.hidden_dim, config.vocab_size,
                  config.label_count)
    gru = 3 * (h * e + h * h + h)
    return v * e + 2 * gru + 2 * (l * h) + l


def save_model(path, params, config, vocab, labels):
    """Write a model file.  Parameters are stored as float32."""
    parts = [MAGIC, struct.pack("<6I", VERSION, config.embed_dim,
                                config.hidden_dim, config.window,
                                config.vocab_size, config.label_count),
             struct.pack("<f", config.keep_prob)]
    parts.append(struct.pack("<I", len(vocab.codepoints)))
    parts.append(np.asarray(vocab.codepoints, dtype="<u4").tobytes())
    parts.append(struct.pack("<I", len(labels)))
    for tag in labels.tags:
        raw = tag.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    for _, tensor in params.tensors():
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncatedError(f"file ends inside {what}", offset=self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def f32(self, what):
        return struct.unpack("<f", self.take(4, what))[0]


def load_model(path):
    """Read a model file; returns (params, config, vocab, labels).

    Header, vocabulary and label arithmetic is validated against the
    actual file size before any tensor is materialized.
    """
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise BadMagicError(f"bad magic bytes, expected {MAGIC!r}", offset=0)
    version = r.u32("version")
    if version != VERSION:
        raise VersionError(f"unsupported format version {version}", offset=4)

    embed_dim = r.u32("embed_dim")
    hidden_dim = r.u32("hidden_dim")
    window = r.u32("window")
    vocab_size = r.u32("vocab_size")
    label_count = r.u32("label_count")
    keep_prob = r.f32("keep_prob")
    for name, val in (("embed_dim", embed_dim), ("hidden_dim", hidden_dim),
                      ("window", window), ("vocab_size", vocab_size),
                      ("label_count", label_count)):
        if not 1 <= val <= MAX_DIM:
            raise SizeError(f"{name}={val} outside sane range [1, {MAX_DIM}]")

    cp_count = r.u32("vocab codepoint count")
    if cp_count != vocab_size - 2:
        raise SizeError(
            f"vocab codepoint count {cp_count} inconsistent with vocab_size {vocab_size}")
    # total size check before touching the payload
    cp_bytes = 4 * cp_count
    if r.pos + cp_bytes > len(data):
        raise TruncatedError("file ends inside the vocabulary", offset=r.pos)
    cps = np.frombuffer(r.take(cp_bytes, "vocabulary"), dtype="<u4")
    if cp_count and cps.max() >= MAX_CODEPOINT:
        raise SizeError(f"codepoint {cps.max()} beyond Unicode range")

    n_labels = r.u32("label count")
    if n_labels != label_count:
        raise SizeError(
            f"label table has {n_labels} entries but header says {label_count}")
    tags = []
    for _ in range(label_count):
        n = r.u32("label length")
        if n > 64:
            raise SizeError(f"label length {n} is absurd", offset=r.pos - 4)
        tags.append(r.take(n, "label").decode("utf-8"))

    config = ModelConfig(vocab_size=vocab_size, label_count=label_count,
                         embed_dim=embed_dim, hidden_dim=hidden_dim,
                         window=window, keep_prob=keep_prob, precision=32)
    expected = 4 * _param_counts(config)
    remaining = len(data) - r.pos
    if remaining < expected:
        raise TruncatedError(
            f"parameter block has {remaining} bytes, need {expected}", offset=r.pos)
    if remaining > expected:
        raise SizeError(
            f"{remaining - expected} trailing bytes after parameters", offset=r.pos)

    def tensor(*shape):
        n = int(np.prod(shape))
        arr = np.frombuffer(r.take(4 * n, "parameters"), dtype="<f4")
        return arr.reshape(shape).astype(np.float32)

    e, h, v, l = embed_dim, hidden_dim, vocab_size, label_count

    def block():
        return GruBlock(tensor(h, e), tensor(h, h), tensor(h),
                        tensor(h, e), tensor(h, h), tensor(h),
                        tensor(h, e), tensor(h, h), tensor(h))

    embedding = tensor(v, e)
    fwd = block()
    bwd = block()
    out_fwd = tensor(l, h)
    out_bwd = tensor(l, h)
    out_bias = tensor(l)
    params = ModelParams(embedding, fwd, bwd, out_fwd, out_bwd, out_bias)
    return params, config, Vocabulary([int(c) for c in cps]), LabelSet(tags)
