"""Train on emitted shards and decode benchmark predictions."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import Vocab, read_shards
from .evaluate import evaluate_zero_shot, write_references
from .model import load_model, save_model
from .train import build_model, train_multitask


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(
        prog="cmptrainer", description="Toy multi-task seq2seq trainer"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a shard directory")
    p.add_argument("--shards", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=3e-3)
    p.add_argument("--loss-log", help="write per-epoch loss reports here (jsonl)")

    p = sub.add_parser("predict", help="decode predictions for benchmark files")
    p.add_argument("--model", required=True)
    p.add_argument("--benchmark", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--beam-size", type=int, default=1)
    p.add_argument("--max-len", type=int, default=64)

    p = sub.add_parser("refs", help="write an eval references file for a benchmark file")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            records = read_shards(args.shards)
            if not records:
                raise ValueError(f"no records under {args.shards}")
            vocab = Vocab.build(
                text for r in records for text in (r.source, r.target)
            )
            model = build_model(vocab)
            history = train_multitask(
                records,
                model,
                vocab,
                epochs=args.epochs,
                seed=args.seed,
                batch_size=args.batch_size,
                learning_rate=args.learning_rate,
            )
            save_model(model, vocab, args.model_out)
            if args.loss_log:
                with open(args.loss_log, "w", encoding="utf-8") as fh:
                    for report in history:
                        fh.write(json.dumps(report.as_dict()) + "\n")
            if history:
                print(f"final total loss: {history[-1].total:.4f}")
        elif args.command == "predict":
            model, vocab = load_model(args.model)
            outputs = evaluate_zero_shot(
                model,
                vocab,
                args.benchmark,
                args.out_dir,
                max_len=args.max_len,
                beam_size=args.beam_size,
            )
            for bench, out in outputs.items():
                print(f"{bench} -> {out}")
        elif args.command == "refs":
            out = write_references(args.benchmark, args.out)
            print(str(out))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
