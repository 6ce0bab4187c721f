"""Causal datasets with known potential outcomes.

Covariates are preprocessed so that no observed value is exactly zero; zero is
reserved for "missing" by the corruption simulator and the models.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
import csv
import dataclasses
from dataclasses import dataclass, field
import hashlib
import itertools
import logging
import os
from typing import Any, Literal, Self, TypeAlias, cast
import warnings

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from . import defaults as defaults
from .autodiff import Array
from .errors import ContractError, DatasetError, ParseError

FeatureKind: TypeAlias = Literal["continuous", "binary"]
ResponseSurface: TypeAlias = Literal["ihdp_like", "acic_like"]

logger = logging.getLogger(__name__)

IHDP_CONTINUOUS = ("bw", "b_head", "preterm", "birth_o", "momage", "work_dur")
IHDP_BINARY = (
    "sex",
    "twin",
    "b_marr",
    "mom_lths",
    "mom_hs",
    "mom_scoll",
    "cig",
    "first",
    "booze",
    "drugs",
    "nnhealth",
    "prenatal",
    "ark",
    "ein",
    "har",
    "mia",
    "pen",
    "tex",
    "was",
)
# Targets of the privacy corruption experiments: 2 continuous, 5 binary.
IHDP_PRIVATE_FEATURES = ("momage", "sex", "twin", "b_marr", "cig", "drugs", "work_dur")

_IHDP_BETA_VALUES = (0.0, 0.1, 0.2, 0.3, 0.4)
_IHDP_BETA_PROBABILITIES = (0.6, 0.1, 0.1, 0.1, 0.1)
_IHDP_OFFSET = 0.5
_IHDP_MEAN_EFFECT = 4.0
_ACIC_ACTIVE = 20
_ACIC_INTERACTIONS = 10


@dataclass(frozen=True, eq=False, kw_only=True)
class CausalDataset:
    x: Array
    t: Array
    y: Array
    mu0: Array | None = None
    mu1: Array | None = None
    feature_kinds: tuple[FeatureKind, ...]
    feature_names: tuple[str, ...]
    preprocessor: Preprocessor | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        n = len(self.t)
        if self.x.ndim != 2 or self.x.shape[0] != n or self.y.shape != (n,):
            raise DatasetError(
                f"Inconsistent shapes: x {self.x.shape}, t {self.t.shape}, y {self.y.shape}."
            )
        if (self.mu0 is None) != (self.mu1 is None):
            raise DatasetError("Potential-outcome means must be given together.")
        for mu in (self.mu0, self.mu1):
            if mu is not None and mu.shape != (n,):
                raise DatasetError(f"Potential-outcome means must have shape ({n},).")
        d = self.x.shape[1]
        if len(self.feature_kinds) != d or len(self.feature_names) != d:
            raise DatasetError(f"Expected {d} feature kinds and names.")
        unknown = set(self.feature_kinds) - {"continuous", "binary"}
        if unknown:
            raise DatasetError(f"Unknown feature kinds {sorted(unknown)}.")
        if not np.all((self.t == 0) | (self.t == 1)):
            raise DatasetError("Treatments must be 0 or 1.")
        if self.t.sum() == 0 or self.t.sum() == n:
            raise DatasetError("Both treatment groups must be non-empty.")

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    @property
    def has_ground_truth(self) -> bool:
        return self.mu0 is not None

    @property
    def tau(self) -> Array:
        """True individual effects mu1 - mu0."""
        if self.mu0 is None or self.mu1 is None:
            raise DatasetError("This dataset has no ground-truth potential outcomes.")
        return self.mu1 - self.mu0

    @property
    def treated(self) -> npt.NDArray[np.intp]:
        return np.flatnonzero(self.t == 1)

    @property
    def control(self) -> npt.NDArray[np.intp]:
        return np.flatnonzero(self.t == 0)

    def column_indices(self, names: Sequence[str]) -> list[int]:
        index = {name: i for i, name in enumerate(self.feature_names)}
        unknown = [name for name in names if name not in index]
        if unknown:
            raise KeyError(f"Unknown features {unknown}.")
        return [index[name] for name in names]

    def subset(self, indices: npt.NDArray[np.intp]) -> CausalDataset:
        return self.replace(
            x=self.x[indices],
            t=self.t[indices],
            y=self.y[indices],
            mu0=None if self.mu0 is None else self.mu0[indices],
            mu1=None if self.mu1 is None else self.mu1[indices],
        )

    def replace(self, **changes: Any) -> CausalDataset:
        return dataclasses.replace(self, **changes)

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        arrays = [self.x, self.t, self.y]
        if self.mu0 is not None and self.mu1 is not None:
            arrays += [self.mu0, self.mu1]
        for array in arrays:
            digest.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, kw_only=True)
class PreprocSpec:
    continuous_range: tuple[float, float] = defaults.CONTINUOUS_RANGE
    binary_encoding: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self) -> None:
        low, high = self.continuous_range
        if not 0 < low < high:
            raise ContractError(f"Continuous range must satisfy 0 < lo < hi, got {(low, high)}.")
        if 0 in self.binary_encoding or len(set(self.binary_encoding)) != 2:
            raise ContractError(
                f"Binary encoding needs two distinct non-zero codes, got {self.binary_encoding}."
            )


@dataclass(frozen=True)
class ColumnMapping:
    kind: FeatureKind
    low: float
    high: float


@dataclass(frozen=True)
class Preprocessor:
    """Mapping fitted on training covariates and reused unchanged on other splits."""

    spec: PreprocSpec
    columns: tuple[ColumnMapping, ...]

    @classmethod
    def fit(cls, ds: CausalDataset, spec: PreprocSpec) -> Self:
        columns = []
        for j, (kind, name) in enumerate(zip(ds.feature_kinds, ds.feature_names, strict=True)):
            values = ds.x[:, j]
            low, high = float(values.min()), float(values.max())
            if kind == "binary" and len(np.unique(values)) > 2:
                raise DatasetError(f"Binary feature {name!r} has more than two levels.")
            if kind == "continuous" and low == high:
                warnings.warn(
                    f"Continuous feature {name!r} is constant; it is mapped to the range midpoint."
                )
            columns.append(ColumnMapping(kind, low, high))
        return cls(spec, tuple(columns))

    def transform_covariates(self, x: Array) -> Array:
        if x.shape[1] != len(self.columns):
            raise DatasetError(f"Expected {len(self.columns)} columns, got {x.shape[1]}.")
        lo, hi = self.spec.continuous_range
        negative, positive = self.spec.binary_encoding
        out = np.empty_like(x, dtype=np.float64)
        for j, column in enumerate(self.columns):
            values = x[:, j]
            if column.kind == "continuous":
                if column.high == column.low:
                    out[:, j] = (lo + hi) / 2
                else:
                    out[:, j] = (values - column.low) / (column.high - column.low) * (hi - lo) + lo
                continue
            is_high = values == column.high
            is_low = values == column.low
            if column.low == column.high:
                is_low = ~is_high
            if not np.all(is_high | is_low):
                raise DatasetError(f"Column {j} has a value outside its two binary levels.")
            out[:, j] = np.where(is_high, positive, negative)
        zeros = out == 0
        if np.any(zeros):
            out[zeros] = defaults.ZERO_NUDGE
        return out

    def transform(self, ds: CausalDataset) -> CausalDataset:
        return ds.replace(x=self.transform_covariates(ds.x), preprocessor=self)

    def to_dict(self) -> dict[str, Any]:
        return {
            "continuous_range": list(self.spec.continuous_range),
            "binary_encoding": list(self.spec.binary_encoding),
            "columns": [[column.kind, column.low, column.high] for column in self.columns],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Self:
        spec = PreprocSpec(
            continuous_range=cast("tuple[float, float]", tuple(data["continuous_range"])),
            binary_encoding=cast("tuple[float, float]", tuple(data["binary_encoding"])),
        )
        columns = tuple(ColumnMapping(kind, low, high) for kind, low, high in data["columns"])
        return cls(spec, columns)


def preprocess(raw: CausalDataset, spec: PreprocSpec | None = None) -> CausalDataset:
    """Fit the zero-free mapping on `raw` and apply it.

    The fitted mapping is kept on `result.preprocessor` for use on test data.
    """
    preprocessor = Preprocessor.fit(raw, PreprocSpec() if spec is None else spec)
    return preprocessor.transform(raw)


@dataclass(frozen=True, kw_only=True)
class GeneratorConfig:
    response_surface: ResponseSurface = "ihdp_like"
    n_samples: int = 747
    n_features: int = 25
    n_binary: int = 19
    seed: int = 0
    selection_bias_strength: float = 1.0
    noise_std: float = 1.0

    def __post_init__(self) -> None:
        if self.response_surface not in ("ihdp_like", "acic_like"):
            raise ContractError(f"Unknown response surface {self.response_surface!r}.")
        if not 0 <= self.n_binary <= self.n_features:
            raise ContractError(
                f"n_binary must lie in [0, n_features], got {self.n_binary} of {self.n_features}."
            )
        if self.n_samples < 20:
            raise ContractError(f"n_samples must be at least 20, got {self.n_samples}.")
        if self.response_surface == "acic_like" and self.n_features < _ACIC_ACTIVE:
            raise ContractError(f"The ACIC-like surface needs at least {_ACIC_ACTIVE} features.")

    @classmethod
    def for_surface(cls, surface: ResponseSurface, **overrides: Any) -> Self:
        if surface == "acic_like":
            base: dict[str, Any] = dict(n_samples=1000, n_features=200, n_binary=100)
        else:
            base = {}
        return cls(response_surface=surface, **{**base, **overrides})

    def replace(self, **changes: Any) -> Self:
        return dataclasses.replace(self, **changes)


def _feature_names(cfg: GeneratorConfig) -> tuple[str, ...]:
    n_continuous = cfg.n_features - cfg.n_binary
    if (
        cfg.response_surface == "ihdp_like"
        and n_continuous == len(IHDP_CONTINUOUS)
        and cfg.n_binary == len(IHDP_BINARY)
    ):
        return IHDP_CONTINUOUS + IHDP_BINARY
    return tuple(f"x{j + 1}" for j in range(cfg.n_features))


def _sample_covariates(
    rng: np.random.Generator, cfg: GeneratorConfig
) -> tuple[Array, tuple[FeatureKind, ...]]:
    n_continuous = cfg.n_features - cfg.n_binary
    continuous = rng.standard_normal((cfg.n_samples, n_continuous))
    probabilities = rng.uniform(0.2, 0.8, size=cfg.n_binary)
    binary = (rng.random((cfg.n_samples, cfg.n_binary)) < probabilities).astype(np.float64)
    kinds: tuple[FeatureKind, ...] = ("continuous",) * n_continuous + ("binary",) * cfg.n_binary
    return np.hstack([continuous, binary]), kinds


def _assign_treatment(rng: np.random.Generator, x: Array, strength: float) -> Array:
    """Logistic selection on standardized covariates; resampled while a group is tiny."""
    std = x.std(axis=0)
    standardized = (x - x.mean(axis=0)) / np.where(std > 0, std, 1.0)
    for _ in range(defaults.MAX_RESAMPLES):
        gamma = rng.standard_normal(x.shape[1]) / np.sqrt(x.shape[1])
        propensity = expit(strength * standardized @ gamma)
        t = (rng.random(len(x)) < propensity).astype(np.float64)
        treated = int(t.sum())
        if min(treated, len(t) - treated) >= defaults.MIN_GROUP_SIZE:
            return t
        logger.debug("Degenerate treatment split (%d treated); resampling.", treated)
    raise DatasetError(
        f"Treatment assignment left a group with fewer than {defaults.MIN_GROUP_SIZE} "
        f"units after {defaults.MAX_RESAMPLES} attempts."
    )


def gen_ihdp_like(cfg: GeneratorConfig) -> CausalDataset:
    """Exponential control / linear treated surface, calibrated to a mean effect of 4."""
    if cfg.response_surface != "ihdp_like":
        raise ContractError(f"Expected the ihdp_like surface, got {cfg.response_surface!r}.")
    rng = np.random.default_rng(cfg.seed)
    x, kinds = _sample_covariates(rng, cfg)
    beta = rng.choice(_IHDP_BETA_VALUES, size=cfg.n_features, p=_IHDP_BETA_PROBABILITIES)
    mu0 = np.exp((x + _IHDP_OFFSET) @ beta)
    linear = x @ beta
    omega = linear.mean() - mu0.mean() - _IHDP_MEAN_EFFECT
    mu1 = linear - omega
    t = _assign_treatment(rng, x, cfg.selection_bias_strength)
    y = np.where(t == 1, mu1, mu0) + cfg.noise_std * rng.standard_normal(cfg.n_samples)
    return CausalDataset(
        x=x, t=t, y=y, mu0=mu0, mu1=mu1, feature_kinds=kinds, feature_names=_feature_names(cfg)
    )


def gen_acic_like(cfg: GeneratorConfig) -> CausalDataset:
    """Sparse high-dimensional surface with a bounded heterogeneous effect in [0.1, 0.5]."""
    if cfg.response_surface != "acic_like":
        raise ContractError(f"Expected the acic_like surface, got {cfg.response_surface!r}.")
    rng = np.random.default_rng(cfg.seed)
    x, kinds = _sample_covariates(rng, cfg)
    active = np.sort(rng.choice(cfg.n_features, size=_ACIC_ACTIVE, replace=False))
    signal = x[:, active]
    coefficients = rng.standard_normal(_ACIC_ACTIVE)
    all_pairs = list(itertools.combinations(range(_ACIC_ACTIVE), 2))
    chosen = rng.choice(len(all_pairs), size=_ACIC_INTERACTIONS, replace=False)
    interaction_weights = 0.5 * rng.standard_normal(_ACIC_INTERACTIONS)
    mu0 = signal @ coefficients
    for weight, pair in zip(interaction_weights, chosen, strict=True):
        i, j = all_pairs[pair]
        mu0 = mu0 + weight * signal[:, i] * signal[:, j]
    kappa = rng.standard_normal(_ACIC_ACTIVE) / np.sqrt(_ACIC_ACTIVE)
    mu1 = mu0 + 0.3 + 0.2 * np.sin(signal @ kappa)
    t = _assign_treatment(rng, x, cfg.selection_bias_strength)
    y = np.where(t == 1, mu1, mu0) + cfg.noise_std * rng.standard_normal(cfg.n_samples)
    return CausalDataset(
        x=x, t=t, y=y, mu0=mu0, mu1=mu1, feature_kinds=kinds, feature_names=_feature_names(cfg)
    )


def generate(cfg: GeneratorConfig) -> CausalDataset:
    if cfg.response_surface == "acic_like":
        return gen_acic_like(cfg)
    return gen_ihdp_like(cfg)


def split(
    ds: CausalDataset, ratio: float = defaults.SPLIT_RATIO, seed: int = 0
) -> tuple[CausalDataset, CausalDataset]:
    """Uniformly permute, then cut at floor(n * ratio)."""
    if not 0 < ratio < 1:
        raise ContractError(f"Split ratio must lie in (0, 1), got {ratio}.")
    n_train = int(np.floor(ds.n * ratio))
    if n_train == 0 or n_train == ds.n:
        raise DatasetError(f"A ratio of {ratio} leaves an empty split of {ds.n} rows.")
    rng = np.random.default_rng(seed)
    for _ in range(defaults.MAX_RESAMPLES):
        order = rng.permutation(ds.n)
        train_index, test_index = order[:n_train], order[n_train:]
        groups = [ds.t[train_index].sum(), ds.t[test_index].sum()]
        if 0 < groups[0] < len(train_index) and 0 < groups[1] < len(test_index):
            return ds.subset(train_index), ds.subset(test_index)
    raise DatasetError(
        "Could not split with both treatment groups present "
        f"after {defaults.MAX_RESAMPLES} attempts."
    )


@dataclass(frozen=True, kw_only=True)
class CsvSchema:
    treatment: str = "t"
    outcome: str = "y"
    mu0: str | None = "mu0"
    mu1: str | None = "mu1"
    feature_kinds: Mapping[str, FeatureKind] = field(default_factory=dict)


def load_csv(path: str | os.PathLike[str], schema: CsvSchema | None = None) -> CausalDataset:
    """Read a dataset with a header row.

    Columns other than the schema's are covariates. A covariate with at most two
    distinct values is binary unless the schema says otherwise. Ground-truth
    columns are used when present.
    """
    schema = CsvSchema() if schema is None else schema
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [name.strip() for name in next(reader)]
        except StopIteration:
            raise ParseError(f"'{path}' is empty.") from None
        for required in (schema.treatment, schema.outcome):
            if required not in header:
                raise ParseError(f"'{path}' line 1: missing column {required!r}.")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"'{path}' line {reader.line_num}: "
                    f"expected {len(header)} cells, got {len(row)}."
                )
            values = []
            for name, cell in zip(header, row, strict=True):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"'{path}' line {reader.line_num}: non-numeric value {cell!r} "
                        f"in column {name!r}."
                    ) from None
            rows.append(values)
    if not rows:
        raise ParseError(f"'{path}' has a header but no data rows.")
    table = np.asarray(rows, dtype=np.float64)
    columns = {name: j for j, name in enumerate(header)}
    reserved = {schema.treatment, schema.outcome}
    ground_truth = None
    mu_names = (schema.mu0, schema.mu1)
    if mu_names[0] is not None and mu_names[1] is not None and set(mu_names) <= set(columns):
        reserved |= {mu_names[0], mu_names[1]}
        ground_truth = (table[:, columns[mu_names[0]]], table[:, columns[mu_names[1]]])
    unknown = set(schema.feature_kinds) - set(header)
    if unknown:
        raise ParseError(f"'{path}' line 1: missing column {sorted(unknown)[0]!r}.")
    names = tuple(name for name in header if name not in reserved)
    x = table[:, [columns[name] for name in names]]
    kinds = tuple(
        schema.feature_kinds.get(
            name, "binary" if len(np.unique(x[:, j])) <= 2 else "continuous"
        )
        for j, name in enumerate(names)
    )
    try:
        return CausalDataset(
            x=x,
            t=table[:, columns[schema.treatment]],
            y=table[:, columns[schema.outcome]],
            mu0=None if ground_truth is None else ground_truth[0],
            mu1=None if ground_truth is None else ground_truth[1],
            feature_kinds=kinds,
            feature_names=names,
        )
    except DatasetError as e:
        raise ParseError(f"'{path}': {e}") from e


def save_csv(ds: CausalDataset, path: str | os.PathLike[str]) -> None:
    header = [*ds.feature_names, "t", "y"]
    columns = [ds.x, ds.t[:, None], ds.y[:, None]]
    if ds.mu0 is not None and ds.mu1 is not None:
        header += ["mu0", "mu1"]
        columns += [ds.mu0[:, None], ds.mu1[:, None]]
    table = np.hstack(columns)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in table:
            writer.writerow([repr(float(value)) for value in row])
