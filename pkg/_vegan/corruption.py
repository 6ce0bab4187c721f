"""Runtime domain corruption: independent distribution shift and zero-padded drops."""

from __future__ import annotations

from collections.abc import Sequence
import dataclasses
from dataclasses import dataclass
import logging
from typing import Any

import numpy as np
import numpy.typing as npt

from . import defaults as defaults
from .autodiff import Array
from .data import CausalDataset
from .errors import ContractError, CorruptionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True)
class CorruptionSpec:
    targets: tuple[str, ...]
    cl: float
    noise_variance: float = defaults.NOISE_VARIANCE
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        if not 0 <= self.cl <= 1:
            raise ContractError(f"Corruption level must lie in [0, 1], got {self.cl}.")
        if not self.noise_variance > 0:
            raise ContractError(f"Noise variance must be positive, got {self.noise_variance}.")

    def replace(self, **changes: Any) -> CorruptionSpec:
        return dataclasses.replace(self, **changes)

    def wipes_out(self, feature_names: Sequence[str]) -> bool:
        return self.cl == 1 and set(feature_names) <= set(self.targets)


def _target_columns(ds: CausalDataset, spec: CorruptionSpec) -> list[int]:
    try:
        return ds.column_indices(spec.targets)
    except KeyError as e:
        raise CorruptionError(f"Cannot corrupt: {e.args[0]}") from None


def _cell_mask(
    rng: np.random.Generator, shape: tuple[int, int], cl: float
) -> npt.NDArray[np.bool_]:
    return rng.random(shape) < cl


def shift(ds: CausalDataset, spec: CorruptionSpec, *, train_means: Array) -> CausalDataset:
    """Shift each target cell independently with probability `cl`.

    Continuous cells get additive Normal(mean, noise_variance) noise, where the
    mean is the training mean of the feature (`train_means`, one entry per
    column). Binary cells are negated.
    """
    columns = _target_columns(ds, spec)
    means = np.asarray(train_means, dtype=np.float64)
    if means.shape != (ds.d,):
        raise ContractError(f"Expected {ds.d} training means, got shape {means.shape}.")
    rng = np.random.default_rng(spec.seed)
    mask = _cell_mask(rng, (ds.n, len(columns)), spec.cl)
    noise = rng.normal(means[columns], np.sqrt(spec.noise_variance), size=(ds.n, len(columns)))
    x = ds.x.copy()
    for k, j in enumerate(columns):
        rows = mask[:, k]
        if ds.feature_kinds[j] == "binary":
            x[rows, j] = -x[rows, j]
        else:
            x[rows, j] = x[rows, j] + noise[rows, k]
    zeros = np.zeros_like(x, dtype=bool)
    zeros[:, columns] = x[:, columns] == 0
    x[zeros] = defaults.ZERO_NUDGE
    logger.debug("Shifted %d of %d target cells.", int(mask.sum()), mask.size)
    return ds.replace(x=x)


def drop(ds: CausalDataset, spec: CorruptionSpec) -> CausalDataset:
    """Zero-pad each target cell independently with probability `cl`."""
    columns = _target_columns(ds, spec)
    rng = np.random.default_rng(spec.seed)
    mask = _cell_mask(rng, (ds.n, len(columns)), spec.cl)
    x = ds.x.copy()
    block = x[:, columns]
    block[mask] = 0.0
    x[:, columns] = block
    logger.debug("Dropped %d of %d target cells.", int(mask.sum()), mask.size)
    return ds.replace(x=x)


def sub_seeds(seed: int) -> tuple[int, int]:
    """Independent seeds for the shift and drop steps of `corrupt`."""
    shift_state, drop_state = (
        int(child.generate_state(1, dtype=np.uint64)[0])
        for child in np.random.SeedSequence(seed).spawn(2)
    )
    return shift_state, drop_state


def corrupt(ds: CausalDataset, spec: CorruptionSpec, *, train_means: Array) -> CausalDataset:
    """Shift, then drop, with independent random streams derived from `spec.seed`."""
    shift_seed, drop_seed = sub_seeds(spec.seed)
    shifted = shift(ds, spec.replace(seed=shift_seed), train_means=train_means)
    return drop(shifted, spec.replace(seed=drop_seed))


def ensure_not_wiped_out(x: Array) -> None:
    """Refuse prediction when every covariate of every row has been dropped."""
    if x.size > 0 and not np.any(x):
        raise CorruptionError(
            "Every covariate is missing: corruption at 100% on all features wipes out "
            "the input, so no prediction is possible."
        )
