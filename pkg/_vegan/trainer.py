"""Alternating adversarial optimisation for the VEGAN and TARNet families."""

from __future__ import annotations

from collections.abc import Callable, Mapping
import csv
import dataclasses
from dataclasses import dataclass, field
import logging
import math
import os
import time
from typing import Any, Literal, Self, TypeAlias

import numpy as np

from . import autodiff as ad
from . import defaults as defaults
from .autodiff import Array, Tensor
from .data import CausalDataset
from .errors import ContractError, DimensionError, NumericDomainError, TrainingError
from .metrics import floor_mmd, mmd_rbf
from .networks import (
    Architecture,
    Batch,
    GeneratorLoss,
    TarnetModel,
    TwinHeadModel,
    VeganModel,
    build_tarnet,
    build_vegan,
    loss_d_beta,
    loss_d_delta,
    loss_generator,
    loss_tarnet,
    predict_ite,
)
from .nn import OptimizerKind, OptimizerState, optimizer_step

logger = logging.getLogger(__name__)

ModelName: TypeAlias = Literal["vegan", "vegan_i", "tarnet", "tarnet_plus"]
MODEL_NAMES: tuple[ModelName, ...] = ("vegan", "vegan_i", "tarnet", "tarnet_plus")
RUNTIME_MODELS: frozenset[ModelName] = frozenset({"vegan", "tarnet_plus"})

# Second entropy word keeps the batch stream apart from the parameter seeds.
_STREAM_TAG = 1

CSV_FIELDS = (
    "epoch",
    "reconstruction",
    "d_delta",
    "d_beta",
    "generator",
    "rmse",
    "mmd_treated_control",
    "mmd_train_runtime",
    "wall_time_ms",
)


@dataclass(frozen=True, kw_only=True)
class TrainConfig:
    epochs: int = defaults.EPOCHS
    batch_size: int = defaults.BATCH_SIZE
    learning_rate: float = defaults.LEARNING_RATE
    d_delta_learning_rate_scale: float = defaults.D_DELTA_LEARNING_RATE_SCALE
    weight_decay: float = defaults.WEIGHT_DECAY
    optimizer: OptimizerKind = "adam"
    latent_dim: int = defaults.LATENT_DIM
    seed: int = 0
    use_runtime_da: bool = True
    d_steps_per_g_step: int = 1
    inference_samples: int = 1
    monitor_mmd: bool = False
    log_every: int = defaults.LOG_EVERY

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ContractError(f"epochs must be at least 1, got {self.epochs}.")
        if self.batch_size < 4 or self.batch_size % 2:
            raise ContractError(f"batch_size must be even and at least 4, got {self.batch_size}.")
        for name in ("latent_dim", "d_steps_per_g_step", "inference_samples", "log_every"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be at least 1, got {getattr(self, name)}.")
        # Surfaces learning rate, weight decay and optimizer kind problems early.
        self.optimizer_state()
        self.optimizer_state(self.d_delta_learning_rate_scale)

    def replace(self, **changes: Any) -> Self:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def architecture(self, n_features: int) -> Architecture:
        return Architecture(n_features=n_features, latent_dim=self.latent_dim)

    def optimizer_state(self, scale: float = 1.0) -> OptimizerState:
        return OptimizerState(
            kind=self.optimizer,
            learning_rate=self.learning_rate * scale,
            weight_decay=self.weight_decay,
        )


@dataclass(frozen=True, kw_only=True)
class EpochRecord:
    epoch: int
    reconstruction: float
    generator: float
    rmse: float
    wall_time_ms: float
    d_delta: float | None = None
    d_beta: float | None = None
    mmd_treated_control: float | None = None
    mmd_train_runtime: float | None = None

    def losses(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in CSV_FIELDS if name != "epoch"}


def per_term_bce(total: float) -> float:
    """Average of the two cross-entropy terms; ln 2 at the discriminator equilibrium."""
    return total / 2


@dataclass
class TrainLog:
    model: str
    records: list[EpochRecord] = field(default_factory=list)
    initial_mmd_treated_control: float | None = None
    initial_mmd_train_runtime: float | None = None

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord) -> None:
        if record.epoch != len(self.records) + 1:
            raise ContractError(
                f"Expected a record for epoch {len(self.records) + 1}, got {record.epoch}."
            )
        for name, value in record.losses().items():
            if value is not None and not math.isfinite(value):
                raise ContractError(f"Epoch {record.epoch} has non-finite {name}.")
        self.records.append(record)

    @property
    def final(self) -> EpochRecord:
        if not self.records:
            raise ContractError(f"The {self.model} training log is empty.")
        return self.records[-1]

    def column(self, name: str) -> list[float | None]:
        return [getattr(record, name) for record in self.records]

    def to_csv(self, path: str | os.PathLike[str]) -> None:
        """One row per epoch; a leading epoch-0 row holds MMDs measured before any update."""

        def cell(value: float | int | None) -> str:
            return "" if value is None else repr(value)

        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(CSV_FIELDS)
            if self.initial_mmd_treated_control is not None:
                initial = {
                    "epoch": 0,
                    "mmd_treated_control": self.initial_mmd_treated_control,
                    "mmd_train_runtime": self.initial_mmd_train_runtime,
                }
                writer.writerow([cell(initial.get(name)) for name in CSV_FIELDS])
            for record in self.records:
                writer.writerow([cell(getattr(record, name)) for name in CSV_FIELDS])


def sample_balanced_batch(
    train: CausalDataset, m: int, rng: np.random.Generator, latent_dim: int
) -> Batch:
    """m/2 treated and m/2 control rows, drawn with replacement, plus m prior samples."""
    if m < 2 or m % 2:
        raise ContractError(f"Balanced batches need a positive even size, got {m}.")
    treated, control = train.treated, train.control
    if not len(treated) or not len(control):
        raise ContractError("Balanced batches need both treatment groups.")
    half = m // 2
    rows = np.concatenate([rng.choice(treated, half), rng.choice(control, half)])
    return Batch(
        x=train.x[rows],
        t=train.t[rows],
        y=train.y[rows],
        noise=rng.standard_normal((m, latent_dim)),
    )


def _minimise(
    loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor], state: OptimizerState
) -> float:
    with ad.Graph() as graph:
        loss = loss_fn()
    grads = graph.backward(loss, params.values())
    optimizer_step(state, params, {name: grads[param] for name, param in params.items()})
    return loss.item()


class AdversarialTrainer:
    """Alternating updates for one model.

    The encoder (phi), the outcome heads (psi) and each discriminator have their
    own optimizer state, and each update only touches its own parameters.
    Discriminators see latents computed outside the tape, so no gradient reaches
    the encoder from their losses.
    """

    def __init__(
        self,
        model: TwinHeadModel,
        cfg: TrainConfig,
        *,
        name: str,
        runtime_x: Array | None = None,
    ) -> None:
        if runtime_x is not None:
            model.check_width(runtime_x)
            if len(runtime_x) == 0:
                raise ContractError("Runtime covariates must contain at least one row.")
        self.model = model
        self.cfg = cfg
        self.name = name
        self.monitor_x = runtime_x
        self.runtime_x = runtime_x if cfg.use_runtime_da else None
        self.rng = np.random.default_rng([cfg.seed, _STREAM_TAG])
        self.optimizers = {player: cfg.optimizer_state() for player in ("phi", "psi", "d_beta")}
        # The prior discriminator learns slower than the encoder it plays against.
        self.optimizers["d_delta"] = cfg.optimizer_state(cfg.d_delta_learning_rate_scale)

    def _latent(self, x: Array) -> Tensor:
        return self.model.represent(Tensor(x), rng=self.rng)

    def runtime_batch(self, m: int) -> Array | None:
        if self.runtime_x is None:
            return None
        return self.runtime_x[self.rng.integers(0, len(self.runtime_x), size=m)]

    def step_d_delta(self, batch: Batch) -> float:
        model = self.model
        if not isinstance(model, VeganModel):
            raise ContractError(f"{type(model).__name__} has no prior discriminator.")
        z = self._latent(batch.x)
        return _minimise(
            lambda: loss_d_delta(model.d_delta, batch.noise, z),
            model.d_delta_parameters(),
            self.optimizers["d_delta"],
        )

    def step_d_beta(self, batch: Batch, runtime: Array) -> float:
        z_sr = self._latent(batch.x)
        z_tr = self._latent(runtime)
        return _minimise(
            lambda: loss_d_beta(self.model.d_beta, z_sr, z_tr),
            self.model.d_beta_parameters(),
            self.optimizers["d_beta"],
        )

    def step_generator(self, batch: Batch, runtime: Array | None) -> GeneratorLoss:
        model = self.model
        with ad.Graph() as graph:
            if isinstance(model, VeganModel):
                losses = loss_generator(model, batch, runtime, rng=self.rng)
            else:
                assert isinstance(model, TarnetModel)
                losses = loss_tarnet(model, batch, runtime)
        encoder = model.encoder_parameters()
        decoder = model.decoder_parameters()
        grads = graph.backward(losses.total, [*encoder.values(), *decoder.values()])
        for player, params in (("phi", encoder), ("psi", decoder)):
            optimizer_step(
                self.optimizers[player],
                params,
                {name: grads[param] for name, param in params.items()},
            )
        return losses

    def run_batch(self, train: CausalDataset) -> dict[str, float | None]:
        batch = sample_balanced_batch(
            train, self.cfg.batch_size, self.rng, self.model.architecture.latent_dim
        )
        runtime = self.runtime_batch(len(batch))
        d_delta = d_beta = None
        for _ in range(self.cfg.d_steps_per_g_step):
            if isinstance(self.model, VeganModel):
                d_delta = self.step_d_delta(batch)
            if runtime is not None:
                d_beta = self.step_d_beta(batch, runtime)
        losses = self.step_generator(batch, runtime)
        return {
            "reconstruction": losses.reconstruction.item(),
            "generator": losses.total.item(),
            "d_delta": d_delta,
            "d_beta": d_beta,
        }

    def factual_rmse(self, train: CausalDataset) -> float:
        prediction = predict_ite(self.model, train.x)
        y_hat = np.where(train.t == 1, prediction.y1, prediction.y0)
        return float(np.sqrt(np.mean((train.y - y_hat) ** 2)))

    def latent_mmd(self, train: CausalDataset) -> tuple[float, float | None]:
        """Treated/control and train/runtime MMD of the deterministic latents."""
        z = self.model.represent(Tensor(train.x), mean=True).numpy()
        treated_control = floor_mmd(mmd_rbf(z[train.treated], z[train.control]))
        if self.monitor_x is None or len(self.monitor_x) < 2:
            return treated_control, None
        z_tr = self.model.represent(Tensor(self.monitor_x), mean=True).numpy()
        return treated_control, floor_mmd(mmd_rbf(z, z_tr))

    def fit(self, train: CausalDataset) -> TrainLog:
        self.model.check_width(train.x)
        cfg = self.cfg
        log = TrainLog(self.name)
        if cfg.monitor_mmd:
            log.initial_mmd_treated_control, log.initial_mmd_train_runtime = self.latent_mmd(
                train
            )
        batches = math.ceil(train.n / cfg.batch_size)
        for epoch in range(1, cfg.epochs + 1):
            start = time.perf_counter()
            totals: dict[str, list[float]] = {}
            for index in range(1, batches + 1):
                try:
                    result = self.run_batch(train)
                except NumericDomainError as e:
                    raise TrainingError(
                        f"Training {self.name} diverged: {e}", epoch=epoch, batch=index
                    ) from e
                for key, value in result.items():
                    if value is not None:
                        totals.setdefault(key, []).append(value)
            wall_time_ms = 1000 * (time.perf_counter() - start)
            means = {key: float(np.mean(values)) for key, values in totals.items()}
            mmd_tc, mmd_tr = self.latent_mmd(train) if cfg.monitor_mmd else (None, None)
            record = EpochRecord(
                epoch=epoch,
                reconstruction=means["reconstruction"],
                generator=means["generator"],
                d_delta=means.get("d_delta"),
                d_beta=means.get("d_beta"),
                rmse=self.factual_rmse(train),
                mmd_treated_control=mmd_tc,
                mmd_train_runtime=mmd_tr,
                wall_time_ms=wall_time_ms,
            )
            if not all(math.isfinite(v) for v in record.losses().values() if v is not None):
                raise TrainingError(
                    f"Training {self.name} produced a non-finite loss.", epoch=epoch, batch=batches
                )
            log.append(record)
            if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
                logger.info(
                    "%s epoch %d/%d: %s",
                    self.name,
                    epoch,
                    cfg.epochs,
                    ", ".join(
                        f"{key}={value:.4f}"
                        for key, value in record.losses().items()
                        if value is not None
                    ),
                )
        return log


def _check_runtime(train: CausalDataset, runtime_x: Array | None) -> None:
    if runtime_x is not None and (runtime_x.ndim != 2 or runtime_x.shape[1] != train.d):
        raise DimensionError(
            f"Runtime covariates have shape {runtime_x.shape}, expected (n, {train.d})."
        )


def train_vegan(
    train: CausalDataset, runtime_x: Array | None, cfg: TrainConfig
) -> tuple[VeganModel, TrainLog]:
    """Two-stage adversarial training; without runtime covariates this is VEGAN_I."""
    _check_runtime(train, runtime_x)
    model = build_vegan(cfg.architecture(train.d), cfg.seed)
    log = AdversarialTrainer(model, cfg, name="vegan", runtime_x=runtime_x).fit(train)
    return model, log


def train_vegan_i(train: CausalDataset, cfg: TrainConfig) -> tuple[VeganModel, TrainLog]:
    model = build_vegan(cfg.architecture(train.d), cfg.seed)
    log = AdversarialTrainer(model, cfg, name="vegan_i").fit(train)
    return model, log


def train_tarnet(train: CausalDataset, cfg: TrainConfig) -> tuple[TarnetModel, TrainLog]:
    model = build_tarnet(cfg.architecture(train.d), cfg.seed)
    log = AdversarialTrainer(model, cfg, name="tarnet").fit(train)
    return model, log


def train_tarnet_plus(
    train: CausalDataset, runtime_x: Array | None, cfg: TrainConfig
) -> tuple[TarnetModel, TrainLog]:
    _check_runtime(train, runtime_x)
    model = build_tarnet(cfg.architecture(train.d), cfg.seed)
    log = AdversarialTrainer(model, cfg, name="tarnet_plus", runtime_x=runtime_x).fit(train)
    return model, log


def train_model(
    name: ModelName, train: CausalDataset, runtime_x: Array | None, cfg: TrainConfig
) -> tuple[TwinHeadModel, TrainLog]:
    """Dispatch by model name; runtime covariates are ignored by models that never use them."""
    if name == "vegan":
        return train_vegan(train, runtime_x, cfg)
    if name == "vegan_i":
        return train_vegan_i(train, cfg)
    if name == "tarnet":
        return train_tarnet(train, cfg)
    if name == "tarnet_plus":
        return train_tarnet_plus(train, runtime_x, cfg)
    raise ContractError(f"Unknown model {name!r}. Please, choose one of {list(MODEL_NAMES)}.")
