# main.py
"""craic: rank Java comment sentences by how predictable they are from their code."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import commands
from errors import CraicError
from loader import load_pipeline_config
from state import WorkDir

logger = logging.getLogger("craic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="craic", description=__doc__)
    parser.add_argument("--config", type=Path, help="Flat YAML key: value configuration file.")
    parser.add_argument("--profile", help="Named profile from data/profiles.yml (desk, full).")
    parser.add_argument("--seed", type=int, help="Seed recorded in every artifact.")
    parser.add_argument("--work", help="Work directory holding the stage artifacts.")
    parser.add_argument("--force", action="store_true", help="Run even when inputs are stale.")
    parser.add_argument("--quiet", action="store_true", help="No progress bars.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress (INFO).")
    parser.add_argument("--debug", action="store_true", help="Log everything (DEBUG).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="Mine method/comment pairs from Java sources.")
    p.add_argument("input", help="Source tree, single .java file, or a file listing paths.")
    p.add_argument("--no-split-underscore-digit", dest="split_underscore_digit", action="store_false",
                   default=None, help="Keep underscores and digit runs inside subtokens.")

    p = sub.add_parser("prep", help="Split the corpus, compress methods, build vocabularies.")
    p.add_argument("--train-size", type=int)
    p.add_argument("--valid-size", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--max-tokens", type=int, help="Method token budget L.")
    p.add_argument("--comment-max-tokens", type=int)

    p = sub.add_parser("train", help="Train the language model or a seq2seq model.")
    p.add_argument("--model", choices=["lm", "s2s"], required=True)
    p.add_argument("--compression", choices=["signature", "begin-end", "identifier"])
    p.add_argument("--epochs", dest="max_epochs", type=int)
    p.add_argument("--hidden-size", type=int)
    p.add_argument("--resume", action="store_true", help="Continue from the saved checkpoint.")

    p = sub.add_parser("score", help="Rank comment sentences with a trained model.")
    p.add_argument("model", help="Model name under models/ (lm, s2s-begin-end, ...) or a .ckpt path.")
    p.add_argument("--split", default="all", choices=["train", "valid", "test", "all"])
    p.add_argument("--json", action="store_true", help="Also write the ranking as JSON lines.")
    p.add_argument("--strip", dest="strip_threshold", type=float,
                   help="Write sources with sentences below this perplexity removed.")
    p.add_argument("--input", help="Source tree to strip (defaults to the configured input).")

    p = sub.add_parser("report", help="Aggregate tables over scored sentences or the corpus.")
    p.add_argument("--by", choices=["javadoc", "category", "stats"], required=True)
    p.add_argument("--model", help="Scored model name (javadoc and category reports).")
    p.add_argument("--labels", help="pair_id -> category file for --by category.")
    p.add_argument("--min-count", type=int)

    p = sub.add_parser("evaluate", help="Train/valid/test perplexity of checkpoints.")
    p.add_argument("models", nargs="+")

    p = sub.add_parser("gradcheck", help="Finite-difference check of the analytic gradients.")
    p.add_argument("--model", choices=["lm", "s2s"], required=True)
    p.add_argument("--hidden-size", type=int, default=8)
    p.add_argument("--vocab-size", type=int, default=20)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--seeds", type=int, default=1)
    return parser


def configure_logging(args):
    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


OVERRIDE_KEYS = ("profile", "seed", "work", "input", "split_underscore_digit", "train_size", "valid_size",
                 "test_size", "max_tokens", "comment_max_tokens", "compression", "strip_threshold", "min_count")
MODEL_OVERRIDE_KEYS = ("max_epochs", "hidden_size")


def overrides_from(args) -> dict:
    overrides = {key: getattr(args, key) for key in OVERRIDE_KEYS if getattr(args, key, None) is not None}
    if args.command == "train":
        target = "lm" if args.model == "lm" else "s2s"
        for key in MODEL_OVERRIDE_KEYS:
            if getattr(args, key, None) is not None:
                overrides[f"{target}.{key}"] = getattr(args, key)
    return overrides


def run(args) -> int:
    progress = not args.quiet and sys.stderr.isatty()
    if args.command == "gradcheck":
        results = commands.cmd_gradcheck(args.model, args.hidden_size, args.vocab_size, args.seeds, args.layers)
        failed = [r for r in results if r.error or r.max_relative_error >= commands.GRADIENT_TOLERANCE]
        return 1 if failed else 0

    config = load_pipeline_config(args.config, overrides_from(args))
    logger.info("Running %s in %s", args.command, config.work)
    with WorkDir(config.work).lock():
        if args.command == "extract":
            commands.cmd_extract(config, progress)
        elif args.command == "prep":
            commands.cmd_prep(config, args.force)
        elif args.command == "train":
            commands.cmd_train(config, args.model, args.resume, args.force, progress)
        elif args.command == "score":
            commands.cmd_score(config, args.model, args.split, args.json, args.force, progress)
        elif args.command == "report":
            commands.cmd_report(config, args.by, args.model, args.labels, args.force)
        elif args.command == "evaluate":
            commands.cmd_evaluate(config, args.models, args.force)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        return run(args)
    except CraicError as e:
        print(json.dumps({"error": e.code, "message": e.message}), file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
