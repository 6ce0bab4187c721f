"""Command-line entry points: generate, corrupt, train, evaluate, experiment, report."""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
import json
import logging
import os
from pathlib import Path
import sys
from typing import cast, get_args

from . import defaults as defaults
from .config import load_experiment_config
from .console import setup_logging
from .corruption import CorruptionSpec, corrupt
from .data import (
    CausalDataset,
    GeneratorConfig,
    Preprocessor,
    PreprocSpec,
    generate,
    load_csv,
    preprocess,
    save_csv,
)
from .errors import ConfigError, VeganError
from .harness import (
    ExperimentConfig,
    TargetSet,
    emit_report,
    evaluate_model,
    load_report,
    resolve_targets,
    run_experiment,
)
from .networks import load_model, save_model
from .trainer import MODEL_NAMES, TrainConfig, train_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (TOML, or JSON by suffix)")
    common.add_argument("--seed", type=int, help="seed overriding the config")
    common.add_argument("--out", help="output file or directory")
    common.add_argument(
        "--threads", type=int, default=1, help="maximum number of runs executed in parallel"
    )
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    common.add_argument("--verbose", action="store_true", help="log debugging details")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_arguments()
    parser = argparse.ArgumentParser(
        prog="vegan",
        description="Treatment-effect estimation robust to runtime domain corruption.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    generate_parser = commands.add_parser(
        "generate", parents=[common], help="write a synthetic dataset as CSV"
    )
    generate_parser.add_argument(
        "--surface", choices=("ihdp_like", "acic_like"), default="ihdp_like"
    )
    generate_parser.add_argument("--n-samples", type=int)
    generate_parser.add_argument("--selection-bias", type=float)

    corrupt_parser = commands.add_parser(
        "corrupt", parents=[common], help="preprocess and corrupt the covariates of a CSV"
    )
    corrupt_parser.add_argument("csv")
    corrupt_parser.add_argument("--cl", type=float, required=True, help="corruption level")
    corrupt_parser.add_argument(
        "--targets",
        default="auto",
        help="'auto', 'all', 'private' or a comma-separated list of feature names",
    )
    corrupt_parser.add_argument("--noise-variance", type=float, default=defaults.NOISE_VARIANCE)
    corrupt_parser.add_argument(
        "--train", help="CSV the preprocessing mapping and noise means are fitted on"
    )

    train_parser = commands.add_parser(
        "train", parents=[common], help="train one model; writes a checkpoint and its log"
    )
    train_parser.add_argument("csv", nargs="?", help="training data (default: from --config)")
    train_parser.add_argument("--model", choices=MODEL_NAMES, default="vegan")
    train_parser.add_argument("--runtime", help="CSV whose covariates are the runtime domain")
    train_parser.add_argument(
        "--preprocessed",
        action="store_true",
        help="the runtime CSV is already mapped (as written by `corrupt`)",
    )
    train_parser.add_argument("--epochs", type=int)

    evaluate_parser = commands.add_parser(
        "evaluate", parents=[common], help="score a checkpoint against ground-truth effects"
    )
    evaluate_parser.add_argument("checkpoint")
    evaluate_parser.add_argument("csv")
    evaluate_parser.add_argument(
        "--preprocessed",
        action="store_true",
        help="the CSV is already mapped (as written by `corrupt`)",
    )
    evaluate_parser.add_argument("--samples", type=int, default=1)

    commands.add_parser("experiment", parents=[common], help="run the full experiment grid")

    report_parser = commands.add_parser(
        "report", parents=[common], help="re-render report files from a stored report.json"
    )
    report_parser.add_argument("report")
    return parser


def _targets(value: str) -> tuple[str, ...] | TargetSet:
    if value in get_args(TargetSet):
        return cast(TargetSet, value)
    return tuple(name.strip() for name in value.split(",") if name.strip())


def _experiment(args: argparse.Namespace) -> ExperimentConfig | None:
    if args.config is None:
        return None
    return load_experiment_config(args.config, require=())


def command_generate(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    if cfg is not None and cfg.dataset.generator is not None:
        generator = cfg.dataset.generator
    else:
        generator = GeneratorConfig.for_surface(args.surface)
    overrides = {
        "n_samples": args.n_samples,
        "selection_bias_strength": args.selection_bias,
        "seed": args.seed,
    }
    generator = generator.replace(**{k: v for k, v in overrides.items() if v is not None})
    path = args.out or "dataset.csv"
    save_csv(generate(generator), path)
    logger.info(
        "Wrote a %s dataset with %d rows to '%s'.",
        generator.response_surface,
        generator.n_samples,
        path,
    )
    return EXIT_OK


def command_corrupt(args: argparse.Namespace) -> int:
    raw = load_csv(args.csv)
    reference = raw if args.train is None else load_csv(args.train)
    cfg = _experiment(args)
    preprocessor = Preprocessor.fit(reference, PreprocSpec() if cfg is None else cfg.preprocess)
    mapped = preprocessor.transform(raw)
    spec = CorruptionSpec(
        targets=resolve_targets(_targets(args.targets), mapped),
        cl=args.cl,
        noise_variance=args.noise_variance,
        seed=0 if args.seed is None else args.seed,
    )
    if spec.wipes_out(mapped.feature_names):
        logger.warning("Corruption at %s on every feature removes all covariates.", args.cl)
    train_means = preprocessor.transform(reference).x.mean(axis=0)
    path = args.out or "corrupted.csv"
    save_csv(corrupt(mapped, spec, train_means=train_means), path)
    logger.info("Wrote corrupted covariates at cl=%s to '%s'.", args.cl, path)
    return EXIT_OK


def command_train(args: argparse.Namespace) -> int:
    cfg = _experiment(args)
    train_cfg = TrainConfig() if cfg is None else cfg.train
    if args.csv is not None:
        raw = load_csv(args.csv)
    elif cfg is not None:
        raw = cfg.dataset.load(0 if args.seed is None else args.seed)
    else:
        raise ConfigError("train needs a dataset CSV or a --config with a [dataset] table.")
    overrides = {"epochs": args.epochs, "seed": args.seed}
    train_cfg = train_cfg.replace(**{k: v for k, v in overrides.items() if v is not None})
    train = preprocess(raw, None if cfg is None else cfg.preprocess)
    assert train.preprocessor is not None
    runtime_x = None
    if args.runtime is not None:
        runtime = load_csv(args.runtime)
        runtime_x = (
            runtime.x
            if args.preprocessed
            else train.preprocessor.transform_covariates(runtime.x)
        )
    model, log = train_model(args.model, train, runtime_x, train_cfg)
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    save_model(
        model,
        out / "model.json",
        {
            "model": args.model,
            "preprocessor": train.preprocessor.to_dict(),
            "train": train_cfg.to_dict(),
            "fingerprint": train.fingerprint(),
        },
    )
    log.to_csv(out / "train_log.csv")
    logger.info("Saved %s checkpoint and training log to '%s'.", args.model, out)
    return EXIT_OK


def command_evaluate(args: argparse.Namespace) -> int:
    model, metadata = load_model(args.checkpoint)
    ds: CausalDataset = load_csv(args.csv)
    if not args.preprocessed:
        ds = Preprocessor.from_dict(metadata["preprocessor"]).transform(ds)
    report = evaluate_model(
        model, ds, seed=0 if args.seed is None else args.seed, samples=args.samples
    )
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(text + "\n")
    return EXIT_OK


def command_experiment(args: argparse.Namespace) -> int:
    if args.config is None:
        raise ConfigError("experiment needs --config.")
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    report = run_experiment(cfg, threads=args.threads)
    emit_report(report, args.out or cfg.out)
    return EXIT_FAILURE if report.failed_cells else EXIT_OK


def command_report(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    emit_report(report, args.out or os.path.dirname(os.path.abspath(args.report)))
    return EXIT_FAILURE if report.failed_cells else EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "generate": command_generate,
    "corrupt": command_corrupt,
    "train": command_train,
    "evaluate": command_evaluate,
    "experiment": command_experiment,
    "report": command_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(quiet=args.quiet, verbose=args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except VeganError as e:
        logger.error("%s", e)
        return EXIT_FAILURE
    except OSError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
