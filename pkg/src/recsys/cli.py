"""Command-line entry point.

``train`` is the offline phase and writes a model directory; ``recommend``,
``labels`` and ``similar`` answer real-time queries against it; ``quantile``
is a standalone order-statistic estimator. Machine output goes to stdout as
JSON or JSON-lines, diagnostics to stderr.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from . import stats
from .errors import ConfigError, DataError, RecsysError
from .pipeline import Config, load_model, train_from_files


MODEL_DIR_ENV = "RECSYS_MODEL_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with data errors
    def error(self, message: str):
        raise _UsageError(f"{self.prog}: error: {message}")


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1: {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="recsys",
        description="Offline training and real-time recommendation over preference vectors and label corpora.",
        epilog="Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric error.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_dir_arg(p: argparse.ArgumentParser, help_text: str) -> None:
        p.add_argument(
            "--model-dir",
            default=os.environ.get(MODEL_DIR_ENV),
            help=f"{help_text} (default: ${MODEL_DIR_ENV})",
        )

    p = sub.add_parser("train", help="offline phase: fit models and write artifacts")
    p.add_argument("--ratings", required=True, help="CSV with header user_id,item_id,rating")
    p.add_argument("--labels", help="JSON-lines of {object_id, labels}; enables the labels command")
    p.add_argument("--synonyms", help="JSON object mapping surface label -> canonical label")
    p.add_argument("--config", required=True, help="JSON config file (must list 'aspects')")
    p.add_argument("--seed", type=_non_negative_int, help="override the config's random seed")
    model_dir_arg(p, "output model directory")

    p = sub.add_parser("recommend", help="collaborative-filter recommendations for one user")
    model_dir_arg(p, "trained model directory")
    p.add_argument("--user", required=True, help="user id")
    p.add_argument("--top", type=_positive_int, help="number of items (default: config top_n)")

    p = sub.add_parser("labels", help="BM25 label recommendations seeded by one object")
    model_dir_arg(p, "trained model directory")
    p.add_argument("--object", required=True, help="seed object id")
    p.add_argument("--p", type=_probability, help="score quantile threshold (default: config quantile_p)")

    p = sub.add_parser("similar", help="distance and similarity between two users")
    model_dir_arg(p, "trained model directory")
    p.add_argument("--user", action="append", required=True, help="user id; give exactly twice")

    p = sub.add_parser("quantile", help="p-quantile estimate with an order-statistic confidence interval")
    p.add_argument("--input", required=True, help="file with one real number per line ('-' for stdin)")
    p.add_argument("--p", type=_probability, default=0.5, help="quantile level (default: 0.5)")
    p.add_argument("--confidence", type=_probability, default=0.95, help="interval confidence (default: 0.95)")
    return parser


def _emit(obj, out: TextIO) -> None:
    out.write(json.dumps(obj, allow_nan=False) + "\n")


def _emit_lines(rows: Iterable[dict], out: TextIO) -> None:
    for row in rows:
        _emit(row, out)


def _model_dir(args) -> Path:
    if not args.model_dir:
        raise ConfigError(f"no model directory: pass --model-dir or set {MODEL_DIR_ENV}")
    return Path(args.model_dir)


def _cmd_train(args, out: TextIO) -> None:
    config = Config.load(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    model_dir = _model_dir(args)
    model = train_from_files(args.ratings, config, model_dir, args.labels, args.synonyms, args.config)
    _emit(
        {
            "model_dir": str(model_dir),
            "users": len(model.vectors),
            "aspects": len(config.aspects),
            "objects": model.corpus.doc_count if model.corpus else 0,
            "covariance_lambda": model.covariance.regularization_lambda if model.covariance else None,
        },
        out,
    )


def _cmd_recommend(args, out: TextIO) -> None:
    model = load_model(_model_dir(args))
    recs = model.recommend(args.user, args.top)
    _emit_lines((r.to_json(args.user) for r in recs), out)


def _cmd_labels(args, out: TextIO) -> None:
    model = load_model(_model_dir(args))
    _emit_lines((s.to_dict() for s in model.labels(args.object, args.p)), out)


def _cmd_similar(args, out: TextIO) -> None:
    if len(args.user) != 2:
        raise _UsageError(f"similar needs --user exactly twice, got {len(args.user)}")
    model = load_model(_model_dir(args))
    _emit(model.similar(*args.user), out)


def read_values(path: str) -> list[float]:
    if path == "-":
        lines = sys.stdin.read().splitlines()
        name = "<stdin>"
    else:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except FileNotFoundError:
            raise DataError(f"input file not found: {path}") from None
        name = path
    values = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            raise DataError(f"{name}:{lineno}: not a number: {text!r}") from None
        if not math.isfinite(value):
            raise DataError(f"{name}:{lineno}: not finite: {text!r}")
        values.append(value)
    return values


def _cmd_quantile(args, out: TextIO) -> None:
    values = read_values(args.input)
    interval = stats.quantile_ci(values, args.p, args.confidence)
    payload = {"estimate": stats.empirical_quantile(values, args.p), **interval.to_dict()}
    _emit(payload, out)


_COMMANDS = {
    "train": _cmd_train,
    "recommend": _cmd_recommend,
    "labels": _cmd_labels,
    "similar": _cmd_similar,
    "quantile": _cmd_quantile,
}


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _COMMANDS[args.command](args, out)
    except _UsageError as exc:
        print(f"recsys: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RecsysError as exc:
        print(f"recsys {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ArithmeticError) as exc:
        print(f"recsys {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
