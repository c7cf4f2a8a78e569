"""Command-line interface: train, predict, eval, build-corpus.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 internal
invariant violation.
"""

import argparse
import json
import os
import sys

import numpy as np

from .corpus import (CorpusFormatError, LabelError, build_stream,
                     dedup_lines, interleave_sources, parse_corpus_file,
                     parse_manifest, split_lines, truncate_lines,
                     SPEAKER_GROUP_CAPS)
from .evaluation import accuracy, confusion_pairs, multi_prf, per_char_accuracy
from .model_io import ModelFileError, load_model, save_model
from .numerics import ParameterError, Rng
from .tasks import (InputError, classify_document, detect_languages,
                    partition_text, predict_chars)
from .training import TrainRunConfig, run_training

USAGE_ERROR, DATA_ERROR, INTERNAL_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def build_parser():
    parser = _Parser(prog="charlid",
                     description="Per-character language identification")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a corpus manifest")
    t.add_argument("--manifest", required=True)
    t.add_argument("--out", required=True, help="output model file")
    t.add_argument("--max-steps", type=int, required=True)
    t.add_argument("--window", type=int, default=200)
    t.add_argument("--embed", type=int, default=200)
    t.add_argument("--hidden", type=int, default=500)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--keep-prob", type=float, default=0.5)
    t.add_argument("--seed", type=int, default=1)
    t.add_argument("--precision", type=int, choices=(32, 64), default=32)
    t.add_argument("--dev-fraction", type=float, default=0.05)
    t.add_argument("--eval-every", type=int, default=200)
    t.add_argument("--patience", type=int, default=5)
    t.add_argument("--min-count", type=int, default=1)

    p = sub.add_parser("predict", help="label documents with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", default="-", help="input file, or - for stdin")
    p.add_argument("--task", choices=("mono", "multi", "spans"), default="mono")
    p.add_argument("--threshold", type=float, default=0.03)
    p.add_argument("--restrict", help="comma-separated tag subset")
    p.add_argument("--min-span", type=int, default=1)
    p.add_argument("--delimiter", default="",
                   help="document delimiter line (default: blank line)")

    e = sub.add_parser("eval", help="score a model against a labeled corpus")
    e.add_argument("--model", required=True)
    e.add_argument("--corpus", required=True)
    e.add_argument("--task", choices=("mono", "multi", "chars"), default="mono")
    e.add_argument("--threshold", type=float, default=0.03)
    e.add_argument("--restrict", help="comma-separated tag subset")
    e.add_argument("--top-k", type=int, default=20)

    b = sub.add_parser("build-corpus",
                       help="dedup, cap, shuffle and split a corpus manifest")
    b.add_argument("--manifest", required=True)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--seed", type=int, default=1)
    b.add_argument("--dev-fraction", type=float, default=0.05)
    b.add_argument("--test-fraction", type=float, default=0.05)
    return parser


def cmd_train(args):
    cfg = TrainRunConfig(
        manifest=args.manifest, max_steps=args.max_steps,
        dev_fraction=args.dev_fraction, eval_every=args.eval_every,
        patience=args.patience, seed=args.seed, embed_dim=args.embed,
        hidden_dim=args.hidden, window=args.window, batch=args.batch,
        keep_prob=args.keep_prob, learning_rate=args.lr,
        precision=args.precision, min_count=args.min_count)
    result = run_training(cfg, log=print)
    params = result.params if cfg.precision == 32 else result.params.astype(np.float32)
    save_model(args.out, params, result.config, result.vocab, result.labels)
    print(f"saved:{args.out} best_dev_loss:{result.best_dev_loss:.6f} "
          f"steps:{result.steps_run}")
    return 0


def split_documents(text, delimiter=""):
    """Split raw input into documents on delimiter lines (default blank)."""
    docs = []
    current = []
    for line in text.split("\n"):
        if line == delimiter:
            docs.append("\n".join(current))
            current = []
        else:
            current.append(line)
    docs.append("\n".join(current))
    # drop leading/trailing empties produced by stray delimiters at the edges
    while docs and not docs[0].strip():
        docs.pop(0)
    while docs and not docs[-1].strip():
        docs.pop()
    return docs


def cmd_predict(args):
    params, config, vocab, labels = load_model(args.model)
    restrict = args.restrict.split(",") if args.restrict else None
    if args.input == "-":
        raw = sys.stdin.read()
    else:
        with open(args.input, encoding="utf-8") as f:
            raw = f.read()
    for doc_id, doc in enumerate(split_documents(raw, args.delimiter)):
        record = {"id": doc_id, "task": args.task}
        if not doc.strip():
            record["error"] = "empty document"
            print(json.dumps(record, ensure_ascii=False))
            continue
        pred = predict_chars(params, config, vocab, labels, doc,
                             restrict_to=restrict)
        if args.task == "mono":
            record["tag"] = classify_document(pred)
        elif args.task == "multi":
            langs = detect_languages(pred, threshold=args.threshold)
            record["tags"] = sorted(langs.tags)
            record["fractions"] = {t: round(f, 6)
                                   for t, f in sorted(langs.fractions.items())}
        else:
            report = partition_text(pred, min_span=args.min_span)
            record["spans"] = [{"start": s, "end": e, "tag": tag}
                               for s, e, tag in report.spans]
        print(json.dumps(record, ensure_ascii=False))
    return 0


def _eval_documents(path, labels):
    """Documents for evaluation: mono = one per line, multi = blank-line blocks."""
    summary = parse_corpus_file(path)
    if summary.skipped_count:
        print(f"warning: skipped {summary.skipped_count} malformed lines "
              f"in {path}", file=sys.stderr)
    unknown = sorted({t for t, _ in summary.pairs if t not in labels})
    if unknown:
        print(f"warning: corpus tags not in model label set (scored as errors): "
              f"{','.join(unknown)}", file=sys.stderr)
    return summary.pairs


def cmd_eval(args):
    params, config, vocab, labels = load_model(args.model)
    restrict = args.restrict.split(",") if args.restrict else None
    pairs = _eval_documents(args.corpus, labels)
    if not pairs:
        raise CorpusFormatError(f"{args.corpus}: no usable lines")

    if args.task == "mono":
        golds, preds = [], []
        for tag, text in pairs:
            if not text:
                continue
            pred = predict_chars(params, config, vocab, labels, text,
                                 restrict_to=restrict)
            golds.append(tag)
            preds.append(classify_document(pred))
        print(f"documents:{len(golds)}")
        print(f"accuracy:{accuracy(golds, preds):.4f}")
        for (a, b), count in confusion_pairs(golds, preds, top_k=args.top_k):
            print(f"confusion:{a}<->{b} count:{count}")
    elif args.task == "multi":
        # blank corpus lines end a document; gold set = tags of its lines
        gold_sets, pred_sets = [], []
        with open(args.corpus, encoding="utf-8") as f:
            blocks = f.read().split("\n\n")
        for block in blocks:
            lines = [ln for ln in block.split("\n") if ln]
            doc_pairs = [ln.partition("\t") for ln in lines]
            doc_pairs = [(t, x) for t, sep, x in doc_pairs if sep]
            text = "".join(x for _, x in doc_pairs)
            if not text:
                continue
            pred = predict_chars(params, config, vocab, labels, text,
                                 restrict_to=restrict)
            gold_sets.append({t for t, _ in doc_pairs})
            pred_sets.append(detect_languages(pred, threshold=args.threshold).tags)
        result = multi_prf(gold_sets, pred_sets)
        print(f"documents:{len(gold_sets)}")
        for key, val in result.as_dict().items():
            print(f"{key}:{val:.4f}")
        print("note: macro averages run over labels seen in gold or prediction")
    else:  # chars
        usable = [(t, x) for t, x in pairs if t in labels]
        stream = build_stream(usable, labels, shuffle=False)
        pred = predict_chars(params, config, vocab, labels, stream.chars,
                             restrict_to=restrict)
        print(f"characters:{len(stream)}")
        print(f"per_char_accuracy:{per_char_accuracy(stream, pred):.4f}")
    return 0


def cmd_build_corpus(args):
    entries = parse_manifest(args.manifest)
    rng = Rng(args.seed)
    os.makedirs(args.out, exist_ok=True)
    pairs = []
    summary_rows = []
    for entry in entries:
        sources = []
        for path in entry.paths:
            file_summary = parse_corpus_file(path)
            sources.append(dedup_lines([text for _, text in file_summary.pairs]))
        mixed = dedup_lines(interleave_sources(sources))
        cap = SPEAKER_GROUP_CAPS[entry.group]
        capped = truncate_lines(mixed, cap)
        chars = sum(len(ln) for ln in capped)
        summary_rows.append(f"language:{entry.tag} group:{entry.group} "
                            f"lines:{len(capped)} chars:{chars} cap:{cap} "
                            f"capped:{'yes' if len(capped) < len(mixed) else 'no'}")
        pairs.extend((entry.tag, ln) for ln in capped)

    train, dev, test = split_lines(pairs, args.dev_fraction, rng,
                                   test_fraction=args.test_fraction)
    for name, part in (("train", train), ("dev", dev), ("test", test)):
        out_path = os.path.join(args.out, f"{name}.tsv")
        with open(out_path, "w", encoding="utf-8") as f:
            for tag, text in part:
                f.write(f"{tag}\t{text}\n")
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8") as f:
        for row in summary_rows:
            f.write(row + "\n")
            print(row)
        counts = (f"split train:{len(train)} dev:{len(dev)} test:{len(test)} "
                  f"seed:{args.seed}")
        f.write(counts + "\n")
        print(counts)
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval,
            "build-corpus": cmd_build_corpus}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CorpusFormatError, LabelError, ModelFileError, InputError,
            ParameterError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except Exception as exc:  # invariant violations and bugs
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
