"""Command line interface.

Subcommands: ``pretrain`` (train and save a digit-range specialist),
``evolve`` (run any configured algorithm), ``bruteforce`` (single-coefficient
mixing sweep), ``eval`` (test accuracy of a saved model), ``report``
(aggregate run histories into mean/standard-error CSV) and ``synth``
(generate a synthetic IDX dataset for offline use).

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import brute_force_mix
from .data import load_dataset, save_idx_images, save_idx_labels, subset
from .errors import ConfigError, DataFormatError
from .mlp import DatasetScorer, MlpArch, SgdConfig, accuracy, pretrain_specialist
from .params import load_params, save_params
from .runner import RunConfig, aggregate_histories, run_experiment
from .synth import make_digits

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_digits(text: str) -> set[int]:
    """Parse digit ranges like ``0-4`` or ``1,3,5-7``."""
    digits: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, _, hi = part.partition("-")
            digits.update(range(int(lo), int(hi) + 1))
        elif part:
            digits.add(int(part))
    if not digits or not digits <= set(range(10)):
        raise ConfigError(f"digit spec {text!r} must name digits in 0..9")
    return digits


def _load_split(images, labels, size, seed):
    dataset = load_dataset(images, labels)
    if size is not None:
        dataset = subset(dataset, size, seed)
    return dataset


def _cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, count, seed in (("train", args.train_size, args.seed),
                               ("test", args.test_size, args.seed + 1)):
        pixels, labels = make_digits(count, seed, noise=args.noise)
        save_idx_images(out / f"{split}-images.idx", pixels)
        save_idx_labels(out / f"{split}-labels.idx", labels)
        print(f"wrote {count} {split} examples to {out / f'{split}-images.idx'}")
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    dataset = _load_split(args.train_images, args.train_labels, args.subset_size, args.seed)
    digits = parse_digits(args.digits)
    arch = MlpArch(hidden_dim=args.hidden_dim)
    config = SgdConfig(learning_rate=args.learning_rate, epochs=args.epochs,
                       batch_size=args.batch_size, seed=args.seed)
    params = pretrain_specialist(dataset, digits, arch, config)
    save_params(args.out, params)
    acc = accuracy(params, arch, dataset)
    print(f"saved specialist for digits {sorted(digits)} to {args.out}")
    print(f"accuracy on the full training split: {acc:.4f}")
    return EXIT_OK


def _cmd_evolve(args) -> int:
    config = RunConfig.from_json_file(args.config)
    result = run_experiment(config, out_dir=args.out)
    last = result.history.rows[-1]
    print(f"algorithm={config.algorithm} evaluations={result.evaluations_done} "
          f"best_train_accuracy={last.best_train_accuracy:.4f} "
          f"test_accuracy={last.test_accuracy:.4f}")
    if args.out:
        print(f"artifacts written to {args.out}")
    return EXIT_OK


def _cmd_bruteforce(args) -> int:
    seed_a = load_params(args.model_a)
    seed_b = load_params(args.model_b)
    if seed_a.shape != seed_b.shape:
        raise ConfigError(
            f"seed models disagree: {seed_a.shape[0]} vs {seed_b.shape[0]} parameters")
    arch = MlpArch.infer(seed_a.shape[0])
    train = _load_split(args.train_images, args.train_labels, args.train_size, args.seed)
    test = _load_split(args.test_images, args.test_labels, args.test_size, args.seed + 1)
    result = brute_force_mix(
        seed_a, seed_b, args.step,
        DatasetScorer(arch, train.images, train.labels),
        DatasetScorer(arch, test.images, test.labels))
    print(f"best coefficient: {result.coefficient:.6g} "
          f"({result.evaluations} training evaluations)")
    print(f"train accuracy: {result.train_accuracy:.4f}")
    print(f"test accuracy: {result.test_accuracy:.4f}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    params = load_params(args.model)
    arch = MlpArch.infer(params.shape[0])
    dataset = load_dataset(args.images, args.labels)
    print(f"accuracy: {accuracy(params, arch, dataset):.4f}")
    return EXIT_OK


def _cmd_report(args) -> int:
    text = aggregate_histories(args.histories)
    Path(args.out).write_text(text)
    print(f"aggregated {len(args.histories)} histories into {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="m2n2", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--verbose", action="store_true", help="log run progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic digit dataset in IDX format")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train-size", type=int, default=4000)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.12)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pretrain", help="train a digit-range specialist and save it")
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--digits", required=True, help="e.g. 0-4 or 5,6,7-9")
    p.add_argument("--out", required=True)
    p.add_argument("--hidden-dim", type=int, default=24)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subset-size", type=int, default=None,
                   help="stratified training subset for desk-scale runs")
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("evolve", help="run a configured evolution experiment")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="directory for history and snapshot")
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("bruteforce", help="sweep a single mixing coefficient")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-images", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--train-size", type=int, default=None)
    p.add_argument("--test-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bruteforce)

    p = sub.add_parser("eval", help="test accuracy of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="aggregate run histories (mean and standard error)")
    p.add_argument("--out", required=True)
    p.add_argument("histories", nargs="+")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
