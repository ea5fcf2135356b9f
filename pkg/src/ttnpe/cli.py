"""Command-line entry point.

Subcommands: fit, embed, classify, experiment, convergence.
Exit codes: 0 success, 1 config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ttnpe.classifier import knn_classify
from ttnpe.errors import ConfigError, DataError, NumericError
from ttnpe.harness import ExperimentConfig, load_dataset, run_convergence, run_experiment, split_per_class, _graph_config
from ttnpe.solver import fit as fit_chain
from ttnpe.tt_subspace import load_chain, project_many, save_chain


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttnpe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--out", help="output path (overrides config output_path)")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--variant", choices=["tn", "atn"], help="override solver variant")
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for interface compatibility; runs are single-threaded")
        if model:
            p.add_argument("--model", required=True, help="saved chain JSON")

    p = sub.add_parser("fit", help="fit a chain on the trial-0 training split and save it")
    common(p)
    p = sub.add_parser("embed", help="embed the whole dataset with a saved chain")
    common(p, model=True)
    p = sub.add_parser("classify", help="classify the trial-0 test split with a saved chain")
    common(p, model=True)
    p = sub.add_parser("experiment", help="run the full tau sweep and write the report")
    common(p)
    p = sub.add_parser("convergence", help="record per-sweep objective traces for both variants")
    common(p)
    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.variant is not None:
        config.variant = args.variant
    if args.out is not None and args.command in ("experiment", "convergence"):
        config.output_path = args.out
    return config


def _trial0_split(config):
    samples, labels = load_dataset(config)
    rng = np.random.default_rng(config.seed)
    train_idx, test_idx = split_per_class(
        labels, config.n_train_per_class, config.n_test_per_class, rng
    )
    return samples, labels, train_idx, test_idx


def _cmd_fit(args, config) -> None:
    if args.out is None:
        raise ConfigError("fit requires --out for the model path")
    samples, labels, train_idx, _ = _trial0_split(config)
    chain, _report = fit_chain(
        samples[..., train_idx], _graph_config(config), config.tau_list[0],
        variant=config.variant, max_sweeps=config.max_sweeps, rank_cap=config.rank_cap,
    )
    save_chain(chain, args.out)


def _cmd_embed(args, config) -> None:
    if args.out is None:
        raise ConfigError("embed requires --out for the coordinates CSV")
    chain = load_chain(args.model)
    samples, labels = load_dataset(config)
    coords = project_many(chain, samples)
    with open(args.out, "w") as fh:
        fh.write("index,label," + ",".join(f"t{i}" for i in range(coords.shape[1])) + "\n")
        for i, (lab, row) in enumerate(zip(labels.tolist(), coords)):
            fh.write(f"{i},{lab}," + ",".join(repr(v) for v in row.tolist()) + "\n")


def _cmd_classify(args, config) -> None:
    chain = load_chain(args.model)
    samples, labels, train_idx, test_idx = _trial0_split(config)
    train_coords = project_many(chain, samples[..., train_idx])
    test_coords = project_many(chain, samples[..., test_idx])
    preds = knn_classify(train_coords, labels[train_idx], test_coords, config.k_classify)
    truth = labels[test_idx]
    wrong = int(np.count_nonzero(preds != truth))
    doc = {
        "n_test": len(truth),
        "n_wrong": wrong,
        "error_rate": wrong / len(truth),
        "predictions": preds.tolist(),
        "labels": truth.tolist(),
    }
    text = json.dumps(doc, separators=(",", ":")) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "fit":
            _cmd_fit(args, config)
        elif args.command == "embed":
            _cmd_embed(args, config)
        elif args.command == "classify":
            _cmd_classify(args, config)
        elif args.command == "experiment":
            run_experiment(config)
        elif args.command == "convergence":
            run_convergence(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
