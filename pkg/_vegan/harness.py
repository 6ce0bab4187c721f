"""Experiment grid over models, corruption levels and seeds, and the reports it produces."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
import csv
import dataclasses
from dataclasses import dataclass, field
import hashlib
import json
import logging
import os
from pathlib import Path
import time
from typing import Any, Literal, Self, TypeAlias

import numpy as np

from . import defaults as defaults
from .autodiff import Array, Tensor
from .corruption import CorruptionSpec, corrupt
from .data import (
    IHDP_PRIVATE_FEATURES,
    CausalDataset,
    GeneratorConfig,
    PreprocSpec,
    generate,
    load_csv,
    preprocess,
    split,
)
from .errors import ContractError, DatasetError, ParseError, VeganError
from .metrics import (
    MetricsReport,
    Summary,
    eps_cate,
    floor_mmd,
    mmd_rbf,
    pehe,
    summarize,
    volatility,
)
from .networks import TwinHeadModel, predict_ite
from .trainer import MODEL_NAMES, RUNTIME_MODELS, ModelName, TrainConfig, train_model

logger = logging.getLogger(__name__)

TargetSet: TypeAlias = Literal["auto", "all", "private"]
ReportFormat: TypeAlias = Literal["csv", "json", "markdown"]
REPORT_FORMATS: tuple[ReportFormat, ...] = ("csv", "json", "markdown")
REPORT_FORMAT = "vegan-report/1"

EPS_CATE_NOTE = (
    "eps_cate is the absolute error of the estimated average effect, "
    "|mean(tau_hat) - mean(tau)|."
)


@dataclass(frozen=True, kw_only=True)
class DatasetSource:
    """Either a synthetic generator (re-seeded per run) or a fixed CSV file."""

    generator: GeneratorConfig | None = None
    csv_path: str | None = None

    def __post_init__(self) -> None:
        if (self.generator is None) == (self.csv_path is None):
            raise ContractError("A dataset source needs exactly one of a generator or a CSV path.")

    def load(self, seed: int) -> CausalDataset:
        if self.csv_path is not None:
            return load_csv(self.csv_path)
        assert self.generator is not None
        return generate(self.generator.replace(seed=seed))

    def to_dict(self) -> dict[str, Any]:
        if self.csv_path is not None:
            return {"csv": self.csv_path}
        assert self.generator is not None
        return dataclasses.asdict(self.generator)


@dataclass(frozen=True, kw_only=True)
class ExperimentConfig:
    dataset: DatasetSource
    preprocess: PreprocSpec = field(default_factory=PreprocSpec)
    corruption_levels: tuple[float, ...] = defaults.CORRUPTION_LEVELS
    targets: tuple[str, ...] | TargetSet = "auto"
    noise_variance: float = defaults.NOISE_VARIANCE
    models: tuple[ModelName, ...] = MODEL_NAMES
    seeds: tuple[int, ...] = tuple(range(10))
    seed: int = 0
    split_ratio: float = defaults.SPLIT_RATIO
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "results"

    def __post_init__(self) -> None:
        if not self.models:
            raise ContractError("An experiment needs at least one model.")
        unknown = [model for model in self.models if model not in MODEL_NAMES]
        if unknown:
            raise ContractError(
                f"Unknown models {unknown}. Please, choose from {list(MODEL_NAMES)}."
            )
        if not self.seeds:
            raise ContractError("An experiment needs at least one seed.")
        if not self.corruption_levels:
            raise ContractError("An experiment needs at least one corruption level.")
        for cl in self.corruption_levels:
            if not 0 <= cl <= 1:
                raise ContractError(f"Corruption levels must lie in [0, 1], got {cl}.")
        if not self.noise_variance > 0:
            raise ContractError(f"Noise variance must be positive, got {self.noise_variance}.")
        if not 0 < self.split_ratio < 1:
            raise ContractError(f"Split ratio must lie in (0, 1), got {self.split_ratio}.")

    @property
    def levels(self) -> tuple[float, ...]:
        """Corruption levels evaluated, always including the uncorrupted test set."""
        return tuple(sorted({0.0, *self.corruption_levels}))

    def replace(self, **changes: Any) -> Self:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset.to_dict(),
            "preprocess": {"continuous_range": list(self.preprocess.continuous_range)},
            "corruption": {
                "cl": list(self.corruption_levels),
                "targets": self.targets if isinstance(self.targets, str) else list(self.targets),
                "noise_variance": self.noise_variance,
            },
            "models": list(self.models),
            "seeds": list(self.seeds),
            "seed": self.seed,
            "split_ratio": self.split_ratio,
            "train": self.train.to_dict(),
        }


def derive_seed(experiment_seed: int, run_seed: int, tag: str) -> int:
    """Independent, reproducible seed for one (experiment, run, purpose) triple."""
    payload = json.dumps([experiment_seed, run_seed, tag]).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def resolve_targets(targets: tuple[str, ...] | TargetSet, ds: CausalDataset) -> tuple[str, ...]:
    if targets == "all":
        return ds.feature_names
    if targets == "private":
        return IHDP_PRIVATE_FEATURES
    if targets == "auto":
        if set(IHDP_PRIVATE_FEATURES) <= set(ds.feature_names):
            return IHDP_PRIVATE_FEATURES
        return ds.feature_names
    return tuple(targets)


def latents(model: TwinHeadModel, x: Array) -> Array:
    return model.represent(Tensor(x), mean=True).numpy()


def evaluate_model(
    model: TwinHeadModel,
    ds: CausalDataset,
    *,
    seed: int,
    train_x: Array | None = None,
    samples: int = 1,
    in_sample_pehe: float | None = None,
) -> MetricsReport:
    """Effect errors against ground truth plus latent MMD diagnostics.

    Args:
        model: Trained model.
        ds: Preprocessed evaluation data with known potential-outcome means.
        seed: Recorded in the report; also seeds latent sampling when `samples` > 1.
        train_x: Training covariates; when given, the train/evaluation latent MMD is reported.
        samples: Number of latent draws averaged per prediction.
        in_sample_pehe: When given, the volatility of this evaluation against it is reported.
    """
    if not ds.has_ground_truth:
        raise DatasetError("Evaluation needs the mu0 and mu1 columns.")
    rng = np.random.default_rng(seed) if samples > 1 else None
    prediction = predict_ite(model, ds.x, samples=samples, rng=rng)
    sqrt_pehe = pehe(prediction.tau, ds.tau)
    z = latents(model, ds.x)
    mmd_treated_control = None
    if len(ds.treated) >= 2 and len(ds.control) >= 2:
        mmd_treated_control = floor_mmd(mmd_rbf(z[ds.treated], z[ds.control]))
    mmd_train_runtime = None
    if train_x is not None and len(train_x) >= 2 and ds.n >= 2:
        mmd_train_runtime = floor_mmd(mmd_rbf(latents(model, train_x), z))
    return MetricsReport(
        sqrt_pehe=sqrt_pehe,
        eps_cate=eps_cate(prediction.tau, ds.tau),
        volatility_pct=(
            None
            if in_sample_pehe is None or in_sample_pehe <= 0
            else volatility(in_sample_pehe, sqrt_pehe)
        ),
        mmd_treated_control=mmd_treated_control,
        mmd_train_runtime=mmd_train_runtime,
        n_eval=ds.n,
        seed=seed,
    )


@dataclass(frozen=True, kw_only=True)
class RunResult:
    """One (model, corruption level, seed) evaluation; `cl` is None for in-sample."""

    model: str
    cl: float | None
    seed: int
    metrics: MetricsReport | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "cl": self.cl,
            "seed": self.seed,
            "metrics": None if self.metrics is None else self.metrics.to_dict(),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        metrics = data["metrics"]
        return cls(
            model=data["model"],
            cl=data["cl"],
            seed=data["seed"],
            metrics=None if metrics is None else MetricsReport.from_dict(metrics),
            error=data["error"],
        )


@dataclass(frozen=True)
class Timing:
    model: str
    cl: float | None
    seed: int
    wall_time_ms: float


@dataclass(frozen=True)
class Task:
    cfg: ExperimentConfig
    run_seed: int
    model: ModelName


@dataclass(frozen=True)
class TaskOutput:
    results: list[RunResult]
    timings: list[Timing]
    fingerprint: str | None


def _failures(task: Task, levels: Iterable[float | None], reason: str) -> list[RunResult]:
    return [RunResult(model=task.model, cl=cl, seed=task.run_seed, error=reason) for cl in levels]


def run_task(task: Task) -> TaskOutput:
    """Train and evaluate one model on one seed across every corruption level.

    Models that never see runtime covariates are trained once and evaluated at every
    level; the others are retrained per level on that level's corrupted covariates.
    """
    cfg, run_seed, name = task.cfg, task.run_seed, task.model
    levels = cfg.levels
    try:
        raw = cfg.dataset.load(derive_seed(cfg.seed, run_seed, "dataset"))
        train_raw, test_raw = split(raw, cfg.split_ratio, derive_seed(cfg.seed, run_seed, "split"))
        train = preprocess(train_raw, cfg.preprocess)
        assert train.preprocessor is not None
        test = train.preprocessor.transform(test_raw)
        targets = resolve_targets(cfg.targets, train)
        train_means = train.x.mean(axis=0)
        corrupted = {
            cl: corrupt(
                test,
                CorruptionSpec(
                    targets=targets,
                    cl=cl,
                    noise_variance=cfg.noise_variance,
                    seed=derive_seed(cfg.seed, run_seed, f"cl={cl!r}"),
                ),
                train_means=train_means,
            )
            for cl in levels
        }
    except VeganError as e:
        logger.warning("%s seed %d: data preparation failed: %s", name, run_seed, e)
        return TaskOutput(_failures(task, [None, *levels], str(e)), [], None)

    train_cfg = cfg.train.replace(seed=derive_seed(cfg.seed, run_seed, "train"))
    samples = train_cfg.inference_samples
    results: list[RunResult] = []
    timings: list[Timing] = []

    def evaluate(
        model: TwinHeadModel, cl: float | None, ds: CausalDataset, in_sample: float | None
    ) -> RunResult:
        try:
            metrics = evaluate_model(
                model,
                ds,
                seed=run_seed,
                train_x=None if cl is None else train.x,
                samples=samples,
                in_sample_pehe=in_sample,
            )
        except VeganError as e:
            logger.warning("%s seed %d cl=%s: evaluation failed: %s", name, run_seed, cl, e)
            return RunResult(model=name, cl=cl, seed=run_seed, error=str(e))
        return RunResult(model=name, cl=cl, seed=run_seed, metrics=metrics)

    def fit(runtime: CausalDataset | None, cls: Sequence[float | None]) -> TwinHeadModel | None:
        start = time.perf_counter()
        try:
            model, _ = train_model(name, train, None if runtime is None else runtime.x, train_cfg)
        except VeganError as e:
            logger.warning("%s seed %d: training failed: %s", name, run_seed, e)
            results.extend(_failures(task, cls, str(e)))
            return None
        elapsed = 1000 * (time.perf_counter() - start)
        timings.extend(Timing(name, cl, run_seed, elapsed) for cl in cls)
        return model

    if name in RUNTIME_MODELS:
        # Volatility at every level is measured against the cl=0 model's in-sample error.
        pehe_in = None
        for cl in levels:
            cells: list[float | None] = [None, cl] if cl == 0 else [cl]
            model = fit(corrupted[cl], cells)
            if model is None:
                continue
            if cl == 0:
                in_sample = evaluate(model, None, train, None)
                results.append(in_sample)
                pehe_in = None if in_sample.metrics is None else in_sample.metrics.sqrt_pehe
            results.append(evaluate(model, cl, corrupted[cl], pehe_in))
    else:
        model = fit(None, [None, *levels])
        if model is not None:
            in_sample = evaluate(model, None, train, None)
            results.append(in_sample)
            pehe_in = None if in_sample.metrics is None else in_sample.metrics.sqrt_pehe
            results.extend(evaluate(model, cl, corrupted[cl], pehe_in) for cl in levels)
    logger.info("Finished %s on seed %d.", name, run_seed)
    return TaskOutput(results, timings, train.fingerprint())


@dataclass(frozen=True, kw_only=True)
class CellResult:
    """Seed aggregate of one (model, cl) cell; `cl` is None for the in-sample row."""

    model: str
    cl: float | None
    sqrt_pehe: Summary | None = None
    eps_cate: Summary | None = None
    mmd_treated_control: Summary | None = None
    mmd_train_runtime: Summary | None = None
    volatility_pct: float | None = None
    failures: tuple[str, ...] = ()

    @property
    def failed(self) -> bool:
        return bool(self.failures)

    def to_dict(self) -> dict[str, Any]:
        def summary(value: Summary | None) -> dict[str, Any] | None:
            return None if value is None else dataclasses.asdict(value)

        return {
            "model": self.model,
            "cl": self.cl,
            "sqrt_pehe": summary(self.sqrt_pehe),
            "eps_cate": summary(self.eps_cate),
            "mmd_treated_control": summary(self.mmd_treated_control),
            "mmd_train_runtime": summary(self.mmd_train_runtime),
            "volatility_pct": self.volatility_pct,
            "failures": list(self.failures),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        def summary(value: Mapping[str, Any] | None) -> Summary | None:
            return None if value is None else Summary(**value)

        return cls(
            model=data["model"],
            cl=data["cl"],
            sqrt_pehe=summary(data["sqrt_pehe"]),
            eps_cate=summary(data["eps_cate"]),
            mmd_treated_control=summary(data["mmd_treated_control"]),
            mmd_train_runtime=summary(data["mmd_train_runtime"]),
            volatility_pct=data["volatility_pct"],
            failures=tuple(data["failures"]),
        )


@dataclass(frozen=True, kw_only=True)
class ExperimentReport:
    config: dict[str, Any]
    in_sample: tuple[CellResult, ...]
    cells: tuple[CellResult, ...]
    runs: tuple[RunResult, ...]
    fingerprints: dict[str, str] = field(default_factory=dict)
    timings: tuple[Timing, ...] = field(default=(), compare=False)

    @property
    def failed_cells(self) -> list[CellResult]:
        return [cell for cell in (*self.in_sample, *self.cells) if cell.failed]

    def cell(self, model: str, cl: float | None) -> CellResult:
        for candidate in (*self.in_sample, *self.cells):
            if candidate.model == model and candidate.cl == cl:
                return candidate
        raise KeyError(f"No cell for model {model!r} at cl={cl}.")

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "note": EPS_CATE_NOTE,
            "config": self.config,
            "fingerprints": self.fingerprints,
            "in_sample": [cell.to_dict() for cell in self.in_sample],
            "cells": [cell.to_dict() for cell in self.cells],
            "runs": [run.to_dict() for run in self.runs],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        if data.get("format") != REPORT_FORMAT:
            raise ParseError(f"Not a {REPORT_FORMAT} document.")
        return cls(
            config=data["config"],
            fingerprints=data["fingerprints"],
            in_sample=tuple(CellResult.from_dict(cell) for cell in data["in_sample"]),
            cells=tuple(CellResult.from_dict(cell) for cell in data["cells"]),
            runs=tuple(RunResult.from_dict(run) for run in data["runs"]),
        )


def _summary(
    runs: Sequence[RunResult], value: Callable[[MetricsReport], float | None]
) -> Summary | None:
    values = [
        v for run in runs if run.metrics is not None and (v := value(run.metrics)) is not None
    ]
    return summarize(values) if values else None


def _aggregate(model: str, cl: float | None, runs: Sequence[RunResult]) -> CellResult:
    return CellResult(
        model=model,
        cl=cl,
        sqrt_pehe=_summary(runs, lambda m: m.sqrt_pehe),
        eps_cate=_summary(runs, lambda m: m.eps_cate),
        mmd_treated_control=_summary(runs, lambda m: m.mmd_treated_control),
        mmd_train_runtime=_summary(runs, lambda m: m.mmd_train_runtime),
        failures=tuple(f"seed {run.seed}: {run.error}" for run in runs if run.error is not None),
    )


def assemble_report(
    cfg: ExperimentConfig, outputs: Sequence[TaskOutput], tasks: Sequence[Task]
) -> ExperimentReport:
    runs = sorted(
        (result for output in outputs for result in output.results),
        key=lambda run: (
            MODEL_NAMES.index(run.model),
            -1.0 if run.cl is None else run.cl,
            cfg.seeds.index(run.seed),
        ),
    )
    in_sample = []
    cells = []
    for model in cfg.models:
        model_runs = [run for run in runs if run.model == model]
        baseline = _aggregate(model, None, [run for run in model_runs if run.cl is None])
        in_sample.append(baseline)
        for cl in cfg.levels:
            cell = _aggregate(model, cl, [run for run in model_runs if run.cl == cl])
            if baseline.sqrt_pehe is not None and cell.sqrt_pehe is not None:
                if baseline.sqrt_pehe.mean > 0:
                    cell = dataclasses.replace(
                        cell,
                        volatility_pct=volatility(baseline.sqrt_pehe.mean, cell.sqrt_pehe.mean),
                    )
            cells.append(cell)
    fingerprints = {
        str(task.run_seed): output.fingerprint
        for task, output in zip(tasks, outputs, strict=True)
        if output.fingerprint is not None
    }
    timings = tuple(
        sorted(
            (timing for output in outputs for timing in output.timings),
            key=lambda t: (t.model, -1.0 if t.cl is None else t.cl, t.seed),
        )
    )
    return ExperimentReport(
        config=cfg.to_dict(),
        in_sample=tuple(in_sample),
        cells=tuple(cells),
        runs=tuple(runs),
        fingerprints=dict(sorted(fingerprints.items(), key=lambda item: int(item[0]))),
        timings=timings,
    )


def run_experiment(cfg: ExperimentConfig, *, threads: int = 1) -> ExperimentReport:
    """Run the (model x corruption level x seed) grid.

    Failed cells are recorded with their reason and the rest of the grid continues.
    With `threads` > 1 independent runs execute in worker processes; the report
    is assembled in a fixed order, so it does not depend on `threads`.
    """
    if threads < 1:
        raise ContractError(f"threads must be at least 1, got {threads}.")
    tasks = [Task(cfg, run_seed, model) for run_seed in cfg.seeds for model in cfg.models]
    logger.info(
        "Running %d models x %d corruption levels x %d seeds.",
        len(cfg.models),
        len(cfg.levels),
        len(cfg.seeds),
    )
    if threads == 1:
        outputs = [run_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as executor:
            outputs = list(executor.map(run_task, tasks))
    report = assemble_report(cfg, outputs, tasks)
    for cell in report.failed_cells:
        logger.warning(
            "Cell %s cl=%s failed for %d seed(s).", cell.model, cell.cl, len(cell.failures)
        )
    return report


def _cl(value: float | None) -> str:
    return "in-sample" if value is None else repr(value)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if value is None else value for value in row])


def _summary_columns(summary: Summary | None) -> list[float | None]:
    return [None, None] if summary is None else [summary.mean, summary.stderr]


def _markdown(report: ExperimentReport) -> str:
    levels = sorted({cell.cl for cell in report.cells if cell.cl is not None})
    models = [cell.model for cell in report.in_sample]

    def entry(summary: Summary | None, failed: bool) -> str:
        if summary is None:
            return "failed" if failed else "-"
        return f"{summary}{' (partial)' if failed else ''}"

    lines = ["# Experiment report", "", f"_{EPS_CATE_NOTE}_", ""]
    for title, attribute in (
        ("Out-of-sample sqrt PEHE", "sqrt_pehe"),
        ("Out-of-sample eps_cate", "eps_cate"),
        ("Latent treated/control MMD", "mmd_treated_control"),
        ("Latent train/runtime MMD", "mmd_train_runtime"),
    ):
        lines += [f"## {title}", ""]
        lines.append("| model | " + " | ".join(f"cl={cl:g}" for cl in levels) + " |")
        lines.append("|---" * (len(levels) + 1) + "|")
        for model in models:
            row = [
                entry(getattr(report.cell(model, cl), attribute), report.cell(model, cl).failed)
                for cl in levels
            ]
            lines.append(f"| {model} | " + " | ".join(row) + " |")
        lines.append("")
    lines += ["## In-sample", "", "| model | sqrt PEHE | eps_cate |", "|---|---|---|"]
    for cell in report.in_sample:
        lines.append(
            f"| {cell.model} | {entry(cell.sqrt_pehe, cell.failed)} "
            f"| {entry(cell.eps_cate, cell.failed)} |"
        )
    lines += ["", "## Volatility (%)", ""]
    lines.append("| model | " + " | ".join(f"cl={cl:g}" for cl in levels) + " |")
    lines.append("|---" * (len(levels) + 1) + "|")
    for model in models:
        values = [report.cell(model, cl).volatility_pct for cl in levels]
        lines.append(
            f"| {model} | "
            + " | ".join("-" if value is None else f"{value:.2f}" for value in values)
            + " |"
        )
    failed = report.failed_cells
    if failed:
        lines += ["", "## Failures", ""]
        lines += [
            f"- {cell.model} ({_cl(cell.cl)}): {reason}"
            for cell in failed
            for reason in cell.failures
        ]
    lines += [
        "",
        "## Configuration",
        "",
        "```json",
        json.dumps(report.config, indent=2, sort_keys=True),
        "```",
        "",
    ]
    return "\n".join(lines)


def emit_report(
    report: ExperimentReport,
    out_dir: str | os.PathLike[str],
    formats: Iterable[ReportFormat] = REPORT_FORMATS,
) -> list[Path]:
    """Write the report tables; returns the paths written."""
    formats = list(formats)
    unknown = sorted(set(formats) - set(REPORT_FORMATS))
    if unknown:
        raise ContractError(f"Unknown report formats {unknown}.")
    if not report.cells and not report.in_sample:
        raise ContractError("Refusing to write a report for an empty grid.")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if "json" in formats:
        path = out / "report.json"
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(path)
    if "markdown" in formats:
        path = out / "report.md"
        path.write_text(_markdown(report))
        written.append(path)
    if "csv" in formats:
        tables: dict[str, tuple[Sequence[str], list[list[Any]]]] = {
            "sqrt_pehe.csv": (
                ("model", "cl", "mean", "stderr"),
                [[c.model, c.cl, *_summary_columns(c.sqrt_pehe)] for c in report.cells],
            ),
            "eps_cate.csv": (
                ("model", "cl", "mean", "stderr"),
                [[c.model, c.cl, *_summary_columns(c.eps_cate)] for c in report.cells],
            ),
            "in_sample.csv": (
                ("model", "sqrt_pehe_mean", "sqrt_pehe_stderr", "eps_cate_mean", "eps_cate_stderr"),
                [
                    [c.model, *_summary_columns(c.sqrt_pehe), *_summary_columns(c.eps_cate)]
                    for c in report.in_sample
                ],
            ),
            "volatility.csv": (
                ("model", "cl", "delta_pct"),
                [[c.model, c.cl, c.volatility_pct] for c in report.cells],
            ),
            "mmd.csv": (
                (
                    "model",
                    "cl",
                    "treated_control_mean",
                    "treated_control_stderr",
                    "train_runtime_mean",
                    "train_runtime_stderr",
                ),
                [
                    [
                        c.model,
                        c.cl,
                        *_summary_columns(c.mmd_treated_control),
                        *_summary_columns(c.mmd_train_runtime),
                    ]
                    for c in report.cells
                ],
            ),
        }
        failed = report.failed_cells
        if failed:
            tables["failures.csv"] = (
                ("model", "cl", "reason"),
                [[c.model, _cl(c.cl), reason] for c in failed for reason in c.failures],
            )
        if report.timings:
            tables["timings.csv"] = (
                ("model", "cl", "seed", "wall_time_ms"),
                [[t.model, _cl(t.cl), t.seed, t.wall_time_ms] for t in report.timings],
            )
        for filename, (header, rows) in tables.items():
            path = out / filename
            _write_rows(path, header, rows)
            written.append(path)
    logger.info("Wrote %d report files to '%s'.", len(written), out)
    return written


def load_report(path: str | os.PathLike[str]) -> ExperimentReport:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid report '{path}' at line {e.lineno}: {e.msg}.") from e
    return ExperimentReport.from_dict(data)
