from __future__ import annotations

import abc
from collections.abc import Mapping
import dataclasses
from dataclasses import dataclass
import math
import os
from typing import Any, ClassVar, Literal, Self, TypeAlias

import numpy as np

from . import autodiff as ad
from . import defaults as defaults
from .autodiff import Array, Tensor
from .corruption import ensure_not_wiped_out
from .errors import ContractError, DimensionError
from .nn import (
    Activation,
    Mlp,
    MlpSpec,
    assign_parameters,
    build_mlp,
    load_checkpoint,
    save_checkpoint,
)

ModelKind: TypeAlias = Literal["vegan", "tarnet"]


@dataclass(frozen=True, kw_only=True)
class Architecture:
    n_features: int
    latent_dim: int = defaults.LATENT_DIM
    extractor_width: int = defaults.EXTRACTOR_WIDTH
    extractor_layers: int = defaults.EXTRACTOR_LAYERS
    decoder_width: int = defaults.DECODER_WIDTH
    decoder_layers: int = defaults.DECODER_LAYERS
    discriminator_width: int = defaults.DISCRIMINATOR_WIDTH
    discriminator_layers: int = defaults.DISCRIMINATOR_LAYERS
    activation: Activation = "elu"

    def __post_init__(self) -> None:
        for name, value in dataclasses.asdict(self).items():
            if isinstance(value, int) and value < 1:
                raise ContractError(f"{name} must be positive, got {value}.")

    def extractor(self) -> MlpSpec:
        return MlpSpec(
            layer_sizes=(self.n_features,) + (self.extractor_width,) * self.extractor_layers,
            activation=self.activation,
        )

    def head(self, *, positive: bool = False) -> MlpSpec:
        return MlpSpec(
            layer_sizes=(self.extractor_width, self.latent_dim),
            activation=self.activation,
            output_activation="softplus" if positive else "identity",
        )

    def decoder(self, input_width: int) -> MlpSpec:
        return MlpSpec(
            layer_sizes=(input_width,) + (self.decoder_width,) * self.decoder_layers + (1,),
            activation=self.activation,
        )

    def discriminator(self, input_width: int) -> MlpSpec:
        return MlpSpec(
            layer_sizes=(input_width,)
            + (self.discriminator_width,) * self.discriminator_layers
            + (1,),
            activation=self.activation,
            output_activation="sigmoid",
        )

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        return cls(**data)


def _component_seeds(seed: int, count: int) -> list[int]:
    return [
        int(child.generate_state(1, dtype=np.uint64)[0])
        for child in np.random.SeedSequence(seed).spawn(count)
    ]


def _prefixed(**components: Mlp) -> dict[str, Tensor]:
    return {
        name: parameter
        for prefix, mlp in components.items()
        for name, parameter in mlp.named_parameters(f"{prefix}.")
    }


class TwinHeadModel(abc.ABC):
    """Shared representation feeding one outcome head per treatment arm."""

    kind: ClassVar[ModelKind]

    def __init__(self, architecture: Architecture, *, psi1: Mlp, psi0: Mlp, d_beta: Mlp) -> None:
        self.architecture = architecture
        self.psi1 = psi1
        self.psi0 = psi0
        self.d_beta = d_beta

    @abc.abstractmethod
    def encoder_parameters(self) -> dict[str, Tensor]: ...

    @abc.abstractmethod
    def represent(
        self, x: Tensor, *, rng: np.random.Generator | None = None, mean: bool = False
    ) -> Tensor:
        """Map covariates to the space the heads and D_beta consume."""

    @abc.abstractmethod
    def discriminator_parameters(self) -> dict[str, Tensor]: ...

    def decoder_parameters(self) -> dict[str, Tensor]:
        return _prefixed(psi1=self.psi1, psi0=self.psi0)

    def d_beta_parameters(self) -> dict[str, Tensor]:
        return _prefixed(d_beta=self.d_beta)

    def named_parameters(self) -> dict[str, Tensor]:
        return {
            **self.encoder_parameters(),
            **self.decoder_parameters(),
            **self.discriminator_parameters(),
        }

    def check_width(self, x: Array | Tensor) -> None:
        shape = x.shape
        if len(shape) != 2 or shape[1] != self.architecture.n_features:
            raise DimensionError(
                f"Model expects {self.architecture.n_features} covariates, "
                f"got shape {tuple(shape)}."
            )


class VeganModel(TwinHeadModel):
    kind = "vegan"

    def __init__(
        self,
        architecture: Architecture,
        *,
        g_phi: Mlp,
        mlp_mu: Mlp,
        mlp_sigma: Mlp,
        psi1: Mlp,
        psi0: Mlp,
        d_delta: Mlp,
        d_beta: Mlp,
    ) -> None:
        super().__init__(architecture, psi1=psi1, psi0=psi0, d_beta=d_beta)
        self.g_phi = g_phi
        self.mlp_mu = mlp_mu
        self.mlp_sigma = mlp_sigma
        self.d_delta = d_delta

    def encoder_parameters(self) -> dict[str, Tensor]:
        return _prefixed(g_phi=self.g_phi, mlp_mu=self.mlp_mu, mlp_sigma=self.mlp_sigma)

    def d_delta_parameters(self) -> dict[str, Tensor]:
        return _prefixed(d_delta=self.d_delta)

    def discriminator_parameters(self) -> dict[str, Tensor]:
        return {**self.d_delta_parameters(), **self.d_beta_parameters()}

    def represent(
        self, x: Tensor, *, rng: np.random.Generator | None = None, mean: bool = False
    ) -> Tensor:
        eps = np.zeros((x.shape[0], self.architecture.latent_dim)) if mean else None
        return encode(self, x, rng=rng, eps=eps).z


class TarnetModel(TwinHeadModel):
    kind = "tarnet"

    def __init__(
        self, architecture: Architecture, *, extractor: Mlp, psi1: Mlp, psi0: Mlp, d_beta: Mlp
    ) -> None:
        super().__init__(architecture, psi1=psi1, psi0=psi0, d_beta=d_beta)
        self.extractor = extractor

    def encoder_parameters(self) -> dict[str, Tensor]:
        return _prefixed(extractor=self.extractor)

    def discriminator_parameters(self) -> dict[str, Tensor]:
        return self.d_beta_parameters()

    def represent(
        self, x: Tensor, *, rng: np.random.Generator | None = None, mean: bool = False
    ) -> Tensor:
        self.check_width(x)
        return ad.elu(self.extractor(x))


def build_vegan(architecture: Architecture, seed: int) -> VeganModel:
    seeds = _component_seeds(seed, 7)
    latent = architecture.latent_dim
    return VeganModel(
        architecture,
        g_phi=build_mlp(architecture.extractor(), seeds[0]),
        mlp_mu=build_mlp(architecture.head(), seeds[1]),
        mlp_sigma=build_mlp(architecture.head(positive=True), seeds[2]),
        psi1=build_mlp(architecture.decoder(latent), seeds[3]),
        psi0=build_mlp(architecture.decoder(latent), seeds[4]),
        d_delta=build_mlp(architecture.discriminator(latent), seeds[5]),
        d_beta=build_mlp(architecture.discriminator(latent), seeds[6]),
    )


def build_tarnet(architecture: Architecture, seed: int) -> TarnetModel:
    seeds = _component_seeds(seed, 4)
    width = architecture.extractor_width
    return TarnetModel(
        architecture,
        extractor=build_mlp(architecture.extractor(), seeds[0]),
        psi1=build_mlp(architecture.decoder(width), seeds[1]),
        psi0=build_mlp(architecture.decoder(width), seeds[2]),
        d_beta=build_mlp(architecture.discriminator(width), seeds[3]),
    )


def build_model(kind: ModelKind, architecture: Architecture, seed: int) -> TwinHeadModel:
    if kind == "vegan":
        return build_vegan(architecture, seed)
    return build_tarnet(architecture, seed)


@dataclass(frozen=True, eq=False)
class LatentSample:
    mu: Tensor
    sigma: Tensor
    eps: Array
    z: Tensor


def _as_input(x: Array | Tensor) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def encode(
    model: VeganModel,
    x: Array | Tensor,
    *,
    rng: np.random.Generator | None = None,
    eps: Array | None = None,
) -> LatentSample:
    """Gaussian posterior and a reparameterized draw z = mu + sigma * eps."""
    model.check_width(x)
    features = ad.elu(model.g_phi(_as_input(x)))
    mu = model.mlp_mu(features)
    sigma = model.mlp_sigma(features) + defaults.SIGMA_FLOOR
    if eps is None:
        if rng is None:
            raise ContractError("encode needs either `rng` or an explicit `eps`.")
        eps = rng.standard_normal(mu.shape)
    elif eps.shape != mu.shape:
        raise DimensionError(f"eps has shape {eps.shape}, expected {mu.shape}.")
    return LatentSample(mu=mu, sigma=sigma, eps=eps, z=mu + sigma * Tensor(eps))


def kl_to_standard_normal(mu: Array, sigma: Array) -> Array:
    """Per-row KL(N(mu, sigma^2) || N(0, I)); a diagnostic, never optimised."""
    return 0.5 * np.sum(sigma**2 + mu**2 - 1.0 - 2.0 * np.log(sigma), axis=1)


@dataclass(frozen=True)
class ItePrediction:
    y0: Array
    y1: Array
    tau: Array


def predict_ite(
    model: TwinHeadModel,
    x: Array,
    *,
    samples: int = 1,
    rng: np.random.Generator | None = None,
) -> ItePrediction:
    """Potential outcomes and effects; deterministic unless `samples` > 1."""
    ensure_not_wiped_out(x)
    model.check_width(x)
    if samples < 1:
        raise ContractError(f"samples must be at least 1, got {samples}.")
    if samples > 1 and rng is None:
        raise ContractError("Averaging over sampled latents needs `rng`.")
    inputs = Tensor(x)
    y0 = np.zeros(len(x))
    y1 = np.zeros(len(x))
    for _ in range(samples):
        z = model.represent(inputs, rng=rng, mean=samples == 1)
        y0 += model.psi0(z).numpy()[:, 0]
        y1 += model.psi1(z).numpy()[:, 0]
    y0 /= samples
    y1 /= samples
    return ItePrediction(y0=y0, y1=y1, tau=y1 - y0)


@dataclass(frozen=True, eq=False)
class Batch:
    """Balanced mini-batch: treated rows first, then control rows, plus prior noise."""

    x: Array
    t: Array
    y: Array
    noise: Array

    def __len__(self) -> int:
        return len(self.t)


def factual_outcomes(model: TwinHeadModel, z: Tensor, t: Array) -> Tensor:
    """Route treated rows to psi1 and control rows to psi0."""
    mask = Tensor(t.reshape(-1, 1))
    return mask * model.psi1(z) + (1.0 - mask) * model.psi0(z)


def loss_reconstruction(y: Array, y_hat: Tensor, t: Array) -> Tensor:
    """Unit-variance Gaussian likelihood: 0.5 * (y - y_hat)^2, averaged per treatment group.

    The result is the mean of the two group means, which equals the batch mean for
    balanced batches.
    """
    n_treated = int(np.sum(t == 1))
    n_control = len(t) - n_treated
    if n_treated == 0 or n_control == 0:
        raise ContractError("Both treatment groups must appear in a reconstruction batch.")
    if y_hat.size != len(y) or len(t) != len(y):
        raise DimensionError(
            f"Outcome shapes disagree: y {y.shape}, y_hat {y_hat.shape}, t {t.shape}."
        )
    weights = np.where(t == 1, 0.5 / n_treated, 0.5 / n_control).reshape(y_hat.shape)
    residual = y_hat - Tensor(y.reshape(y_hat.shape))
    return ad.sum(ad.square(residual) * Tensor(0.5 * weights))


def _log_probability(p: Tensor) -> Tensor:
    return ad.log(ad.clip(p, defaults.PROBABILITY_CLAMP, 1 - defaults.PROBABILITY_CLAMP))


def _log_complement(p: Tensor) -> Tensor:
    return ad.log(ad.clip(1.0 - p, defaults.PROBABILITY_CLAMP, 1 - defaults.PROBABILITY_CLAMP))


def _check_pair(real: Array | Tensor, fake: Array | Tensor) -> None:
    if real.shape != fake.shape:
        raise DimensionError(
            f"Discriminator batches must match, got {tuple(real.shape)} and {tuple(fake.shape)}."
        )


def loss_d_delta(discriminator: Mlp, noise: Array | Tensor, z_sr: Tensor) -> Tensor:
    """Cross-entropy with prior samples labelled 1 and source latents labelled 0."""
    _check_pair(noise, z_sr)
    return -ad.mean(_log_probability(discriminator(_as_input(noise)))) - ad.mean(
        _log_complement(discriminator(z_sr))
    )


def loss_d_beta(discriminator: Mlp, z_sr: Tensor, z_tr: Tensor) -> Tensor:
    """Cross-entropy with source latents labelled 1 and runtime latents labelled 0."""
    _check_pair(z_sr, z_tr)
    return -ad.mean(_log_probability(discriminator(z_sr))) - ad.mean(
        _log_complement(discriminator(z_tr))
    )


def runtime_deception(discriminator: Mlp, z_sr: Tensor, z_tr: Tensor) -> Tensor:
    """Generator side of the source/runtime game: each domain should pass as the other."""
    _check_pair(z_sr, z_tr)
    return -ad.mean(_log_complement(discriminator(z_sr))) - ad.mean(
        _log_probability(discriminator(z_tr))
    )


@dataclass(frozen=True, eq=False)
class GeneratorLoss:
    total: Tensor
    reconstruction: Tensor
    deception_delta: Tensor | None
    deception_beta: Tensor | None


def loss_generator(
    model: VeganModel,
    batch: Batch,
    runtime_x: Array | None = None,
    *,
    rng: np.random.Generator,
) -> GeneratorLoss:
    """Reconstruction plus the non-saturating deception terms, with discriminators held fixed.

    The D_beta terms are included only when a runtime batch is supplied.
    """
    sample = encode(model, batch.x, rng=rng)
    reconstruction = loss_reconstruction(
        batch.y, factual_outcomes(model, sample.z, batch.t), batch.t
    )
    deception_delta = -ad.mean(_log_probability(model.d_delta(sample.z)))
    total = reconstruction + deception_delta
    deception_beta = None
    if runtime_x is not None:
        model.check_width(runtime_x)
        z_tr = encode(model, runtime_x, rng=rng).z
        deception_beta = runtime_deception(model.d_beta, sample.z, z_tr)
        total = total + deception_beta
    return GeneratorLoss(total, reconstruction, deception_delta, deception_beta)


def loss_tarnet(
    model: TarnetModel, batch: Batch, runtime_x: Array | None = None
) -> GeneratorLoss:
    """TARNet reconstruction; with a runtime batch, TARNet+ adds the D_beta deception terms."""
    features = model.represent(Tensor(batch.x))
    reconstruction = loss_reconstruction(
        batch.y, factual_outcomes(model, features, batch.t), batch.t
    )
    total = reconstruction
    deception_beta = None
    if runtime_x is not None:
        runtime_features = model.represent(_as_input(runtime_x))
        deception_beta = runtime_deception(model.d_beta, features, runtime_features)
        total = total + deception_beta
    return GeneratorLoss(total, reconstruction, None, deception_beta)


def equilibrium_loss() -> float:
    """Discriminator cross-entropy when it outputs 0.5 everywhere (2 ln 2)."""
    return 2 * math.log(2)


def save_model(
    model: TwinHeadModel, path: str | os.PathLike[str], metadata: Mapping[str, Any]
) -> None:
    save_checkpoint(
        path,
        model.named_parameters(),
        {"kind": model.kind, "architecture": model.architecture.to_dict(), **metadata},
    )


def load_model(path: str | os.PathLike[str]) -> tuple[TwinHeadModel, dict[str, Any]]:
    arrays, metadata = load_checkpoint(path)
    model = build_model(metadata["kind"], Architecture.from_dict(metadata["architecture"]), 0)
    assign_parameters(model.named_parameters(), arrays)
    return model, metadata
