"""Command-line entry points: train, predict, evaluate, dump-examples,
oracle-check, plus a toy-data generator for self-contained runs.

The data root comes from the config file or the SGDST_DATA_ROOT environment
variable.  Exit code is 0 on success and 1 on any pipeline error (bad config,
missing data, frame alignment failures).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from sgdst.pipeline import (
    ABLATIONS,
    DATA_ROOT_ENV,
    PipelineError,
    RunConfig,
    apply_ablation,
    dump_examples,
    evaluate,
    load_config,
    oracle_check,
    predict,
    train,
)


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to a YAML run config")


def _load(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if getattr(args, "ablation", None):
        config = apply_ablation(config, args.ablation)
    if getattr(args, "output_dir", None):
        config = dataclasses.replace(config, output_dir=args.output_dir)
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgdst",
        description="schema-guided dialogue state tracking: train, predict, evaluate",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and keep the best dev checkpoint")
    _add_config_arg(p_train)
    p_train.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_train.add_argument(
        "--ablation", choices=sorted(ABLATIONS), default=None,
        help="apply a named input ablation before training",
    )
    p_train.add_argument("--output-dir", default=None, help="override the config output_dir")
    p_train.add_argument("--resume", action="store_true", help="resume from last.pt")
    p_train.add_argument(
        "--force", action="store_true",
        help="resume even if the checkpoint was trained with a different config",
    )

    p_pred = sub.add_parser("predict", help="write a predicted-state dump for a split")
    _add_config_arg(p_pred)
    p_pred.add_argument("--checkpoint", default=None, help="trained checkpoint (.pt)")
    p_pred.add_argument("--split", default="test")
    p_pred.add_argument("--output", default=None, help="dump path (JSON lines)")
    p_pred.add_argument(
        "--disable-carryover", action="append", default=[], metavar="CLASS",
        help="remap this carryover class to none at decode time (repeatable): "
             "in_sys_uttr, in_service_hist, in_cross_service_hist",
    )
    p_pred.add_argument(
        "--oracle", action="store_true",
        help="replace the model with gold head labels derived on the fly",
    )

    p_eval = sub.add_parser("evaluate", help="score a prediction dump against gold")
    p_eval.add_argument("--predictions", required=True, help="dump written by predict")
    p_eval.add_argument(
        "--data-root", default=None,
        help=f"corpus root (defaults to ${DATA_ROOT_ENV})",
    )
    p_eval.add_argument("--split", default="test")
    p_eval.add_argument("--report", default=None, help="write the full report JSON here")
    p_eval.add_argument("--csv", default=None, help="also write a per-service CSV table")

    p_dump = sub.add_parser(
        "dump-examples", help="debug rendering of serialized inputs and labels"
    )
    _add_config_arg(p_dump)
    p_dump.add_argument("--split", default="train")
    p_dump.add_argument("--output", default=None)
    p_dump.add_argument("--limit", type=int, default=None)

    p_oracle = sub.add_parser(
        "oracle-check", help="label + decode consistency audit against gold states"
    )
    _add_config_arg(p_oracle)
    p_oracle.add_argument("--split", default="train")
    p_oracle.add_argument("--report", default=None, help="write the summary JSON here")

    p_toy = sub.add_parser("toy-data", help="generate the bundled synthetic corpus")
    p_toy.add_argument("--output", required=True, help="corpus root to create")
    p_toy.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_train(args) -> int:
    config = _load(args)
    best = train(config, resume=args.resume, force=args.force)
    print(f"best checkpoint: {best}")
    return 0


def _cmd_predict(args) -> int:
    config = _load(args)
    path = predict(
        config,
        checkpoint=args.checkpoint,
        split=args.split,
        output=args.output,
        disable_carryover=args.disable_carryover,
        oracle=args.oracle,
    )
    print(path)
    return 0


def _cmd_evaluate(args) -> int:
    import os

    root = args.data_root or os.environ.get(DATA_ROOT_ENV, "")
    if not root:
        raise PipelineError(
            f"no data root: pass --data-root or set {DATA_ROOT_ENV}"
        )
    report = evaluate(
        args.predictions, root, args.split, report_path=args.report, csv_path=args.csv
    )
    print(json.dumps(report["overall"], indent=2))
    return 0


def _cmd_dump_examples(args) -> int:
    config = _load(args)
    path = dump_examples(config, args.split, output=args.output, limit=args.limit)
    print(path)
    return 0


def _cmd_oracle_check(args) -> int:
    config = _load(args)
    summary = oracle_check(config, args.split)
    if args.report:
        Path(args.report).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_toy_data(args) -> int:
    from sgdst.toydata import generate_toy_corpus

    splits = generate_toy_corpus(args.output, seed=args.seed)
    for split, path in splits.items():
        print(f"{split}: {path}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "dump-examples": _cmd_dump_examples,
    "oracle-check": _cmd_oracle_check,
    "toy-data": _cmd_toy_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
