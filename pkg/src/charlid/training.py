"""End-to-end training: manifest -> streams -> windows -> optimizer loop.

Training keeps the best checkpoint by development loss and stops early
after a configurable number of evaluations without improvement.  All
randomness is derived from the run seed, so a rerun with the same seed
reproduces the loss log exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from .corpus import (CorpusFormatError, LabelSet, batch_windows, build_stream,
                     build_vocab, dedup_lines, interleave_sources, make_windows,
                     parse_corpus_file, parse_manifest, split_lines,
                     truncate_lines, SPEAKER_GROUP_CAPS)
from .network import (ModelConfig, forward_batch, init_params,
                      make_adam_states, train_step)
from .numerics import Rng


@dataclass
class TrainRunConfig:
    manifest: str
    max_steps: int                   # no sensible default exists; always explicit
    dev_fraction: float = 0.05
    eval_every: int = 200
    patience: int = 5
    seed: int = 1
    embed_dim: int = 200
    hidden_dim: int = 500
    window: int = 200
    batch: int = 64
    keep_prob: float = 0.5
    learning_rate: float = 1e-4
    precision: int = 32
    min_count: int = 1


@dataclass
class TrainResult:
    params: object
    config: ModelConfig
    vocab: object
    labels: LabelSet
    history: list = field(default_factory=list)  # logged lines
    best_dev_loss: float = float("inf")
    steps_run: int = 0


def load_language_lines(entry):
    """Dedup each source, interleave round-robin, dedup across sources, cap."""
    sources = []
    skipped = 0
    for path in entry.paths:
        summary = parse_corpus_file(path)
        skipped += summary.skipped_count
        sources.append(dedup_lines([text for _, text in summary.pairs]))
    mixed = dedup_lines(interleave_sources(sources))
    capped = truncate_lines(mixed, SPEAKER_GROUP_CAPS[entry.group])
    return capped, skipped


def load_manifest_pairs(manifest_path):
    """All (tag, line) pairs of a manifest, plus a per-language summary."""
    entries = parse_manifest(manifest_path)
    pairs = []
    summary = []
    for entry in entries:
        lines, skipped = load_language_lines(entry)
        chars = sum(len(ln) for ln in lines)
        summary.append({"tag": entry.tag, "group": entry.group,
                        "lines": len(lines), "chars": chars,
                        "cap": SPEAKER_GROUP_CAPS[entry.group],
                        "skipped": skipped})
        pairs.extend((entry.tag, ln) for ln in lines)
    return pairs, summary


def dev_metrics(params, config, windows, batch=64):
    """Masked mean cross-entropy and per-character accuracy on fixed windows."""
    total_nll = 0.0
    total_correct = 0
    total_chars = 0
    for start in range(0, len(windows), batch):
        group = windows[start:start + batch]
        ids = np.stack([w[0] for w in group])
        gold = np.stack([w[1] for w in group])
        mask = np.stack([w[2] for w in group]).astype(bool)
        trace = forward_batch(params, config, ids, train_mode=False)
        p_gold = np.take_along_axis(trace.posteriors, gold[..., None], axis=2)[..., 0]
        total_nll += float(-np.log(np.maximum(p_gold, 1e-12))[mask].sum())
        pred = np.argmax(trace.posteriors, axis=-1)
        total_correct += int((pred[mask] == gold[mask]).sum())
        total_chars += int(mask.sum())
    if total_chars == 0:
        return 0.0, 0.0
    return total_nll / total_chars, total_correct / total_chars


def run_training(cfg, log=None, stop_at_dev_acc=None):
    """Train a model from a manifest; returns a TrainResult.

    stop_at_dev_acc optionally ends the run as soon as the development
    per-character accuracy reaches the given value (used by smoke-scale
    runs where full convergence is not the point).
    """
    result_log = []

    def emit(line):
        result_log.append(line)
        if log is not None:
            log(line)

    pairs, summary = load_manifest_pairs(cfg.manifest)
    langs = {tag for tag, _ in pairs}
    if len(langs) < 2:
        raise CorpusFormatError(
            f"need at least 2 languages to train, manifest provides {len(langs)}")
    labels = LabelSet(sorted(langs))
    for row in summary:
        emit(f"language:{row['tag']} group:{row['group']} lines:{row['lines']} "
             f"chars:{row['chars']} cap:{row['cap']} skipped:{row['skipped']}")

    init_rng = Rng(cfg.seed)
    data_rng = Rng(cfg.seed + 1)
    drop_rng = Rng(cfg.seed + 2)

    train_pairs, dev_pairs, _ = split_lines(pairs, cfg.dev_fraction, data_rng)
    if not dev_pairs:
        raise CorpusFormatError("development split is empty; raise dev_fraction")

    vocab_stream = build_stream(train_pairs, labels, shuffle=False)
    vocab = build_vocab([vocab_stream], min_count=cfg.min_count)
    dev_stream = build_stream(dev_pairs, labels, shuffle=False)
    dev_windows = make_windows(dev_stream, vocab, window=cfg.window)
    emit(f"vocab_size:{vocab.size} labels:{len(labels)} "
         f"train_chars:{len(vocab_stream)} dev_chars:{len(dev_stream)}")

    config = ModelConfig(vocab_size=vocab.size, label_count=len(labels),
                         embed_dim=cfg.embed_dim, hidden_dim=cfg.hidden_dim,
                         window=cfg.window, keep_prob=cfg.keep_prob,
                         precision=cfg.precision)
    params = init_params(config, init_rng)
    adam = make_adam_states(params, learning_rate=cfg.learning_rate)

    best = params.copy()
    best_dev = float("inf")
    bad_evals = 0
    step = 0
    done = False
    while not done:
        # fresh epoch: reshuffle lines, rebuild the stream, reshuffle windows
        epoch_stream = build_stream(train_pairs, labels, shuffle=True, rng=data_rng)
        windows = make_windows(epoch_stream, vocab, window=cfg.window)
        for wb in batch_windows(windows, batch=cfg.batch, rng=data_rng, shuffle=True):
            loss = train_step(params, config,
                              (wb.char_ids, wb.gold, wb.loss_mask), adam, drop_rng)
            step += 1
            emit(f"step:{step} train_loss:{loss:.6f}")
            if step % cfg.eval_every == 0 or step == cfg.max_steps:
                dev_loss, dev_acc = dev_metrics(params, config, dev_windows,
                                                batch=cfg.batch)
                emit(f"step:{step} dev_loss:{dev_loss:.6f} dev_acc:{dev_acc:.4f}")
                if dev_loss < best_dev:
                    best_dev = dev_loss
                    best = params.copy()
                    bad_evals = 0
                else:
                    bad_evals += 1
                if stop_at_dev_acc is not None and dev_acc >= stop_at_dev_acc:
                    emit(f"stop:target_dev_acc step:{step}")
                    done = True
                    break
                if bad_evals > cfg.patience:
                    emit(f"stop:early_stopping step:{step}")
                    done = True
                    break
            if step >= cfg.max_steps:
                emit(f"stop:max_steps step:{step}")
                done = True
                break

    return TrainResult(best, config, vocab, labels, result_log, best_dev, step)
