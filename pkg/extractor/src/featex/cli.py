"""Command-line front end.

Subcommands: ``extract`` dumps hierarchy feature tensors for every
manifest image; ``train`` fine-tunes a backbone on labeled synthetic
defects and saves a checkpoint.  Exit codes: 0 success, 1 usage error
(bad flags or values outside documented ranges), 2 data or format
error (unreadable or invalid inputs).  Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .backbones import BACKBONES, ExtractorConfig
from .exceptions import FeatexError
from .extract import extract_features
from .train import ProxyTrainConfig, train_proxy


class _UsageError(Exception):
    """Flag problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems exit 1; argparse's default of 2 is reserved
        # for data errors here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_hierarchies(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise _UsageError(
            f"--hierarchies expects comma-separated integers, got {text!r}"
        ) from None


def _extractor_config(args) -> ExtractorConfig:
    try:
        return ExtractorConfig(
            backbone=args.backbone,
            weights=args.weights,
            input_size=args.input_size,
            hierarchies=_parse_hierarchies(args.hierarchies),
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc


def _cmd_extract(args) -> int:
    summary = extract_features(args.manifest, _extractor_config(args), args.out_dir)
    if summary.skipped:
        print(
            f"featex: warning: skipped {summary.skipped} unreadable images",
            file=sys.stderr,
        )
    print(
        f"wrote {summary.files} tensor files from {summary.images} images"
        f" -> {args.out_dir}"
    )
    return 0


def _cmd_train(args) -> int:
    model_cfg = _extractor_config(args)
    try:
        cfg = ProxyTrainConfig(
            classes=args.classes,
            learning_rate=args.lr,
            batch_size=args.batch_size,
            micro_batch=args.micro_batch,
            iterations=args.iterations,
            input_size=args.input_size,
            seed=args.seed,
        )
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    result = train_proxy(
        args.normal_manifest,
        args.synth_manifest,
        cfg,
        model_cfg,
        args.checkpoint,
        log_path=args.log,
    )
    print(
        f"final loss {result.loss_trace[-1]:.6f} after {len(result.loss_trace)}"
        f" iterations -> {result.checkpoint_path}"
    )
    return 0


def _add_model_flags(p, input_size: int):
    p.add_argument("--backbone", default="resnet18", choices=BACKBONES)
    p.add_argument(
        "--weights",
        default="imagenet",
        help="'imagenet', 'random', or a checkpoint path",
    )
    p.add_argument("--input-size", type=int, default=input_size)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="featex",
        description="dump CNN hierarchy features and fine-tune on synthetic defects",
    )
    parser.add_argument("--version", action="version", version=f"featex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="write per-image hierarchy tensors")
    p.add_argument("--manifest", required=True, help="sample list (.rebm)")
    p.add_argument("--out-dir", required=True)
    _add_model_flags(p, 256)
    p.add_argument("--hierarchies", default="2,3", help="comma-separated levels")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="fine-tune a backbone on synthetic defects")
    p.add_argument("--normal-manifest", required=True, help="label-0 samples (.rebm)")
    p.add_argument("--synth-manifest", required=True, help="defect samples (.rebm)")
    p.add_argument("--checkpoint", required=True, help="output weights path")
    _add_model_flags(p, 256)
    p.add_argument("--classes", type=int, default=7)
    p.add_argument("--lr", type=float, default=0.03)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--micro-batch", type=int, default=64)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", help="run log path (default: <checkpoint>.log)")
    p.set_defaults(func=_cmd_train, hierarchies="2,3")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.WARNING, format="featex: %(levelname)s: %(message)s"
    )
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"featex: error: {exc}", file=sys.stderr)
        return 1
    except FeatexError as exc:
        print(f"featex: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"featex: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
