"""Effect-estimation errors and latent distribution distances."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import dataclasses
from dataclasses import dataclass
import math
from typing import Any, Literal, Self

import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist, pdist

from .autodiff import Array
from .errors import ContractError, DimensionError

MMD_TOLERANCE = 1e-9


def _effects(tau_hat: npt.ArrayLike, tau: npt.ArrayLike) -> tuple[Array, Array]:
    estimate = np.asarray(tau_hat, dtype=np.float64).reshape(-1)
    truth = np.asarray(tau, dtype=np.float64).reshape(-1)
    if estimate.shape != truth.shape:
        raise DimensionError(
            f"Estimated and true effects differ in length: {estimate.size} != {truth.size}."
        )
    if estimate.size == 0:
        raise ContractError("Effect errors need at least one unit.")
    return estimate, truth


def pehe(tau_hat: npt.ArrayLike, tau: npt.ArrayLike) -> float:
    """Square root of the mean squared error of individual effects."""
    estimate, truth = _effects(tau_hat, tau)
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def eps_cate(tau_hat: npt.ArrayLike, tau: npt.ArrayLike) -> float:
    """Absolute error of the average effect."""
    estimate, truth = _effects(tau_hat, tau)
    return float(abs(np.mean(estimate) - np.mean(truth)))


def volatility(e_in: float, e_corr: float) -> float:
    """Relative change, in percent, of an error under corruption."""
    if not e_in > 0:
        raise ContractError(f"Volatility needs a positive in-sample error, got {e_in}.")
    return 100.0 * abs(e_in - e_corr) / e_in


def median_bandwidth(a: Array, b: Array) -> float:
    """Median pairwise Euclidean distance over the pooled rows; 1.0 if degenerate."""
    distances = pdist(np.vstack([a, b]))
    median = float(np.median(distances)) if distances.size else 0.0
    return median if median > 0 else 1.0


def mmd_rbf(
    a: npt.ArrayLike, b: npt.ArrayLike, bandwidth: float | Literal["median"] = "median"
) -> float:
    """Unbiased estimate of the squared MMD under k(x, y) = exp(-|x - y|^2 / (2 bw^2)).

    Args:
        a: Samples from the first distribution, one per row.
        b: Samples from the second distribution, with the same number of columns.
        bandwidth: Kernel width, or "median" for the pooled median distance.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"Samples differ in width: {a.shape[1]} != {b.shape[1]}.")
    m, n = len(a), len(b)
    if m < 2 or n < 2:
        raise ContractError(f"MMD needs at least 2 rows per sample, got {m} and {n}.")
    bw = median_bandwidth(a, b) if bandwidth == "median" else float(bandwidth)
    if not bw > 0:
        raise ContractError(f"Bandwidth must be positive, got {bw}.")

    def kernel(x: Array, y: Array) -> Array:
        return np.exp(-0.5 * cdist(x, y, "sqeuclidean") / bw**2)

    k_aa = kernel(a, a)
    k_bb = kernel(b, b)
    k_ab = kernel(a, b)
    within_a = (k_aa.sum() - np.trace(k_aa)) / (m * (m - 1))
    within_b = (k_bb.sum() - np.trace(k_bb)) / (n * (n - 1))
    if a.shape == b.shape and np.array_equal(a, b):
        # Paired samples: the cross term skips i == j too, so identical samples give 0.
        across = (k_ab.sum() - np.trace(k_ab)) / (m * (m - 1))
    else:
        across = k_ab.mean()
    return float(within_a + within_b - 2.0 * across)


def floor_mmd(value: float) -> float:
    """Reporting value of an unbiased estimate, which can dip below zero."""
    return max(value, 0.0)


@dataclass(frozen=True)
class Summary:
    mean: float
    stderr: float
    n: int

    def __str__(self) -> str:
        return f"{self.mean:.3f} ± {self.stderr:.3f}"


def summarize(values: Sequence[float]) -> Summary:
    """Mean and standard error (sample std / sqrt(n)); stderr is 0 for one value."""
    if not values:
        raise ContractError("Cannot summarize an empty sample.")
    array = np.asarray(values, dtype=np.float64)
    stderr = float(np.std(array, ddof=1) / math.sqrt(len(array))) if len(array) > 1 else 0.0
    return Summary(float(np.mean(array)), stderr, len(array))


@dataclass(frozen=True, kw_only=True)
class MetricsReport:
    sqrt_pehe: float
    eps_cate: float
    n_eval: int
    seed: int
    mmd_treated_control: float | None = None
    volatility_pct: float | None = None
    mmd_train_runtime: float | None = None

    def __post_init__(self) -> None:
        if self.sqrt_pehe < 0 or self.eps_cate < 0:
            raise ContractError("Effect errors cannot be negative.")
        for name in ("mmd_treated_control", "mmd_train_runtime"):
            value = getattr(self, name)
            if value is not None and value < -MMD_TOLERANCE:
                raise ContractError(f"{name} is {value}, below the estimator tolerance.")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        return cls(**data)
