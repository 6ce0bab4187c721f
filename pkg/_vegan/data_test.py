import math
import os
from pathlib import Path

import numpy as np
import pytest

from .conftest import TEST_DATA_DIR
from .data import (
    IHDP_PRIVATE_FEATURES,
    CausalDataset,
    CsvSchema,
    GeneratorConfig,
    Preprocessor,
    PreprocSpec,
    ResponseSurface,
    generate,
    load_csv,
    preprocess,
    save_csv,
    split,
)
from .errors import ContractError, DatasetError, ParseError


def test_ihdp_like_defaults() -> None:
    ds = generate(GeneratorConfig(seed=0))
    assert (ds.n, ds.d) == (747, 25)
    assert ds.feature_kinds.count("binary") == 19
    assert set(IHDP_PRIVATE_FEATURES) <= set(ds.feature_names)
    assert ds.has_ground_truth


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ihdp_like_mean_effect(seed: int) -> None:
    ds = generate(GeneratorConfig(seed=seed))
    assert ds.tau.mean() == pytest.approx(4.0)
    assert min(len(ds.treated), len(ds.control)) >= 5


def test_acic_like_effect_is_bounded() -> None:
    ds = generate(GeneratorConfig.for_surface("acic_like", n_samples=200, seed=4))
    assert ds.d == 200
    assert np.all(ds.tau >= 0.1)
    assert np.all(ds.tau <= 0.5)


@pytest.mark.parametrize("surface", ["ihdp_like", "acic_like"])
def test_unbiased_assignment_is_balanced(surface: ResponseSurface) -> None:
    cfg = GeneratorConfig.for_surface(surface, n_samples=4000, selection_bias_strength=0.0)
    treated = generate(cfg).t.mean()
    assert treated == pytest.approx(0.5, abs=3 * math.sqrt(0.25 / 4000))


def test_generation_is_deterministic() -> None:
    cfg = GeneratorConfig(n_samples=50, seed=9)
    assert generate(cfg).fingerprint() == generate(cfg).fingerprint()
    assert generate(cfg).fingerprint() != generate(cfg.replace(seed=10)).fingerprint()


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"n_samples": 10}, "at least 20"),
        ({"n_binary": 30}, "n_binary"),
        ({"response_surface": "acic_like", "n_features": 10, "n_binary": 5}, "at least 20"),
        ({"response_surface": "lalonde"}, "Unknown response surface"),
    ],
)
def test_invalid_generator(kwargs: dict[str, object], message: str) -> None:
    with pytest.raises(ContractError, match=message):
        GeneratorConfig(**kwargs)  # type: ignore[arg-type]


def test_preprocess_removes_zeros(raw_dataset: CausalDataset) -> None:
    ds = preprocess(raw_dataset)
    assert not np.any(ds.x == 0)
    continuous = [j for j, kind in enumerate(ds.feature_kinds) if kind == "continuous"]
    binary = [j for j, kind in enumerate(ds.feature_kinds) if kind == "binary"]
    assert ds.x[:, continuous].min() == pytest.approx(0.05)
    assert ds.x[:, continuous].max() == pytest.approx(1.0)
    assert set(np.unique(ds.x[:, binary])) <= {-1.0, 1.0}
    assert ds.preprocessor is not None


def test_preprocess_maps_levels() -> None:
    raw = CausalDataset(
        x=np.array([[2.0, 0.0], [4.0, 1.0], [6.0, 1.0]]),
        t=np.array([1.0, 0.0, 1.0]),
        y=np.zeros(3),
        feature_kinds=("continuous", "binary"),
        feature_names=("age", "sex"),
    )
    ds = preprocess(raw)
    np.testing.assert_allclose(ds.x[:, 0], [0.05, 0.525, 1.0])
    np.testing.assert_array_equal(ds.x[:, 1], [-1.0, 1.0, 1.0])


def test_preprocess_is_idempotent(dataset: CausalDataset) -> None:
    np.testing.assert_allclose(preprocess(dataset).x, dataset.x, rtol=0, atol=1e-12)


def test_test_split_reuses_training_mapping(raw_dataset: CausalDataset) -> None:
    train, test = split(raw_dataset, 0.75, seed=1)
    mapped = preprocess(train)
    assert mapped.preprocessor is not None
    test_mapped = mapped.preprocessor.transform(test)
    # Values outside the training range extrapolate linearly.
    j = raw_dataset.feature_kinds.index("continuous")
    column = mapped.preprocessor.columns[j]
    expected = (test.x[:, j] - column.low) / (column.high - column.low) * 0.95 + 0.05
    expected[expected == 0] = 1e-6
    np.testing.assert_allclose(test_mapped.x[:, j], expected)


def test_preprocessor_serialisation(dataset: CausalDataset) -> None:
    assert dataset.preprocessor is not None
    restored = Preprocessor.from_dict(dataset.preprocessor.to_dict())
    assert restored == dataset.preprocessor


def test_constant_continuous_column_warns(raw_dataset: CausalDataset) -> None:
    x = raw_dataset.x.copy()
    x[:, 0] = 3.0
    with pytest.warns(UserWarning, match="is constant"):
        ds = preprocess(raw_dataset.replace(x=x))
    np.testing.assert_allclose(ds.x[:, 0], 0.525)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"continuous_range": (0.0, 1.0)},
        {"continuous_range": (1.0, 0.5)},
        {"binary_encoding": (0, 1)},
    ],
)
def test_invalid_preprocessing(kwargs: dict[str, object]) -> None:
    with pytest.raises(ContractError):
        PreprocSpec(**kwargs)  # type: ignore[arg-type]


def test_split_sizes_and_groups(raw_dataset: CausalDataset) -> None:
    train, test = split(raw_dataset, 0.75, seed=0)
    assert (train.n, test.n) == (60, 20)
    for part in (train, test):
        assert 0 < part.t.sum() < part.n
    again, _ = split(raw_dataset, 0.75, seed=0)
    np.testing.assert_array_equal(train.x, again.x)


@pytest.mark.parametrize("ratio", [0.0, 1.0, 1.5])
def test_split_rejects_bad_ratio(raw_dataset: CausalDataset, ratio: float) -> None:
    with pytest.raises(ContractError):
        split(raw_dataset, ratio)


def test_split_rejects_empty_part(raw_dataset: CausalDataset) -> None:
    with pytest.raises(DatasetError, match="empty split"):
        split(raw_dataset, 0.001)


def test_dataset_rejects_single_group() -> None:
    with pytest.raises(DatasetError, match="Both treatment groups"):
        CausalDataset(
            x=np.ones((3, 1)),
            t=np.ones(3),
            y=np.zeros(3),
            feature_kinds=("continuous",),
            feature_names=("a",),
        )


def test_tau_without_ground_truth() -> None:
    ds = CausalDataset(
        x=np.ones((2, 1)),
        t=np.array([0.0, 1.0]),
        y=np.zeros(2),
        feature_kinds=("continuous",),
        feature_names=("a",),
    )
    assert not ds.has_ground_truth
    with pytest.raises(DatasetError, match="no ground-truth"):
        _ = ds.tau


def test_csv_keeps_values(tmp_path: Path, raw_dataset: CausalDataset) -> None:
    path = tmp_path / "data.csv"
    save_csv(raw_dataset, path)
    loaded = load_csv(path)
    np.testing.assert_array_equal(loaded.x, raw_dataset.x)
    assert loaded.feature_kinds == raw_dataset.feature_kinds
    assert loaded.fingerprint() == raw_dataset.fingerprint()


def test_csv_without_ground_truth() -> None:
    ds = load_csv(os.path.join(TEST_DATA_DIR, "no_ground_truth.csv"))
    assert not ds.has_ground_truth
    assert ds.feature_names == ("age", "smoker")
    assert ds.feature_kinds == ("continuous", "binary")


def test_csv_schema_overrides_kinds() -> None:
    schema = CsvSchema(feature_kinds={"smoker": "continuous"})
    ds = load_csv(os.path.join(TEST_DATA_DIR, "no_ground_truth.csv"), schema)
    assert ds.feature_kinds == ("continuous", "continuous")


@pytest.mark.parametrize(
    "filename, message",
    [
        ("missing_treatment.csv", "line 1: missing column 't'"),
        ("non_numeric.csv", "line 3: non-numeric value 'abc'"),
        ("ragged.csv", "line 2: expected 4 cells, got 3"),
    ],
)
def test_invalid_csv(filename: str, message: str) -> None:
    with pytest.raises(ParseError, match=message):
        load_csv(os.path.join(TEST_DATA_DIR, filename))
