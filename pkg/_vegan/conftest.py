from collections.abc import Generator
import logging
import os
from pathlib import Path

import numpy as np
import pytest

from .config import CONFIG
from .data import CausalDataset, GeneratorConfig, generate, preprocess

TEST_DATA_DIR = "test_data"


@pytest.fixture(autouse=True)
def restore_console_config() -> Generator[None]:
    color, style = CONFIG.color, CONFIG.style
    yield
    CONFIG.color = color
    CONFIG.style = style


@pytest.fixture(autouse=True)
def reset_package_logger() -> Generator[None]:
    logger = logging.getLogger("_vegan")
    handlers, level = list(logger.handlers), logger.level
    yield
    logger.handlers[:] = handlers
    logger.setLevel(level)


@pytest.fixture
def raw_dataset() -> CausalDataset:
    return generate(GeneratorConfig(n_samples=80, n_features=6, n_binary=3, seed=3))


@pytest.fixture
def dataset(raw_dataset: CausalDataset) -> CausalDataset:
    return preprocess(raw_dataset)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def in_tmp_dir(tmp_path: Path) -> Generator[Path]:
    cwd = os.getcwd()
    os.chdir(tmp_path)
    yield tmp_path
    os.chdir(cwd)
