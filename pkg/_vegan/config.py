from __future__ import annotations

from collections.abc import Callable, Collection, Mapping
from dataclasses import dataclass
import difflib
import json
import os.path
import tomllib
from typing import Any, ClassVar, Literal, TypeAlias, cast
import warnings

import platformdirs

from . import defaults as defaults
from .data import GeneratorConfig, PreprocSpec
from .errors import ConfigError, ContractError
from .harness import DatasetSource, ExperimentConfig
from .highlight import validate_style
from .trainer import TrainConfig


def _read_table(filepath: str) -> dict[str, Any] | None:
    """Parse a TOML or JSON file, warning and returning None if it cannot be read."""
    try:
        with open(filepath, "rb") as f:
            content = f.read()
    except OSError as e:
        warnings.warn(f"Unable to load config from '{filepath}'. ({type(e).__name__})")
        return None
    try:
        if filepath.endswith(".json"):
            data = json.loads(content)
        else:
            data = tomllib.loads(content.decode())
    except (ValueError, UnicodeDecodeError) as e:
        warnings.warn(f"Unable to load config from '{filepath}'. ({type(e).__name__})")
        return None
    if not isinstance(data, dict):
        warnings.warn(f"Unable to load config from '{filepath}'. (expected a table)")
        return None
    return data


def _warn_unused(key: str, known: Collection[str], filepath: str) -> None:
    warning_msg = f"Unused field '{key}' found in '{filepath}'."
    suggestions = difflib.get_close_matches(key, possibilities=known, n=1)
    if suggestions:
        [suggestion] = suggestions
        warning_msg += f" Did you mean {suggestion!r}?"
    warnings.warn(warning_msg)


@dataclass
class ConsoleConfig:
    color: bool | Literal["auto"]
    style: str

    def __init__(self) -> None:
        self._style = defaults.DEFAULT_STYLE
        self.color = "auto"

    _FILENAME: ClassVar[str] = "vegan.toml"
    _SECTION: ClassVar[str] = "console"
    _USER_FILENAME: ClassVar[str] = os.path.join(platformdirs.user_config_dir("vegan"), _FILENAME)
    _LOCAL_FILENAME: ClassVar[str] = os.path.join(os.getcwd(), _FILENAME)

    @property  # type: ignore
    def style(self) -> str:
        return self._style

    @style.setter
    def style(self, value: str) -> None:
        try:
            validate_style(value)
        except ValueError as e:
            warnings.warn(str(e))
        else:
            self._style = value

    def use_config(self, filepath: str) -> None:
        """Apply the `[console]` table (or top-level keys) of a TOML file.

        Problems never raise: they warn and leave the current value in place.
        """
        filepath = os.path.abspath(filepath)
        data = _read_table(filepath)
        if data is None:
            return
        section = data.get(self._SECTION)
        if isinstance(section, dict):
            for key in data:
                if key != self._SECTION:
                    warnings.warn(
                        f"Extra section [{key}] found in '{filepath}'. "
                        f"Please, use no sections or one section called [{self._SECTION}]."
                    )
        else:
            section = data
        for key, value in section.items():
            if key == "color":
                if not isinstance(value, bool) and value != "auto":
                    self.warn_invalid_type(
                        expected="bool or 'auto'", key=key, filepath=filepath, value=value
                    )
                    continue
                self.color = value
            elif key == "style":
                if not isinstance(value, str):
                    self.warn_invalid_type(expected="str", key=key, filepath=filepath, value=value)
                    continue
                self.style = value
            else:
                _warn_unused(key, ("color", "style"), filepath)

    @classmethod
    def warn_invalid_type(cls, *, expected: str, key: str, filepath: str, value: Any) -> None:
        warnings.warn(
            f"Invalid value {value!r} found in field {key!r} (expected {expected}) in '{filepath}'."
        )


Check: TypeAlias = tuple[str, Callable[[Any], bool]]


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, int | float) and not isinstance(value, bool)


def _list_of(check: Check) -> Check:
    name, predicate = check
    return f"list of {name}", lambda value: isinstance(value, list) and all(map(predicate, value))


def _either(first: Check, second: Check) -> Check:
    return f"{first[0]} or {second[0]}", lambda value: first[1](value) or second[1](value)


INT: Check = ("int", _is_int)
NUMBER: Check = ("number", _is_number)
BOOL: Check = ("bool", lambda value: isinstance(value, bool))
STRING: Check = ("string", lambda value: isinstance(value, str))

TOP_LEVEL: dict[str, Check] = {
    "seed": INT,
    "seeds": _list_of(INT),
    "models": _list_of(STRING),
    "out": STRING,
}
SECTIONS: dict[str, dict[str, Check]] = {
    "dataset": {
        "generator": STRING,
        "csv": STRING,
        "n_samples": INT,
        "n_features": INT,
        "n_binary": INT,
        "selection_bias_strength": NUMBER,
        "noise_std": NUMBER,
        "split_ratio": NUMBER,
    },
    "preprocess": {"continuous_range": _list_of(NUMBER)},
    "corruption": {
        "targets": _either(STRING, _list_of(STRING)),
        "cl": _either(NUMBER, _list_of(NUMBER)),
        "noise_variance": NUMBER,
    },
    "train": {
        "epochs": INT,
        "batch_size": INT,
        "learning_rate": NUMBER,
        "d_delta_learning_rate_scale": NUMBER,
        "weight_decay": NUMBER,
        "optimizer": STRING,
        "latent_dim": INT,
        "seed": INT,
        "use_runtime_da": BOOL,
        "d_steps_per_g_step": INT,
        "inference_samples": INT,
        "monitor_mmd": BOOL,
        "log_every": INT,
    },
}
EXPERIMENT_REQUIRED = ("models", "seeds", "corruption.cl")


def _validated(
    table: Mapping[str, Any], checks: Mapping[str, Check], filepath: str, prefix: str = ""
) -> dict[str, Any]:
    values = {}
    for key, value in table.items():
        if key not in checks:
            _warn_unused(prefix + key, [prefix + known for known in checks], filepath)
            continue
        expected, predicate = checks[key]
        if not predicate(value):
            raise ConfigError(
                f"Invalid value {value!r} found in field {prefix + key!r} "
                f"(expected {expected}) in '{filepath}'."
            )
        values[key] = value
    return values


def experiment_config_from_dict(
    data: Mapping[str, Any], filepath: str, *, require: Collection[str] = EXPERIMENT_REQUIRED
) -> ExperimentConfig:
    top_level = {key: value for key, value in data.items() if key not in SECTIONS}
    values = _validated(top_level, TOP_LEVEL, filepath)
    sections: dict[str, dict[str, Any]] = {}
    for name, checks in SECTIONS.items():
        table = data.get(name, {})
        if not isinstance(table, dict):
            raise ConfigError(f"Expected a [{name}] table in '{filepath}'.")
        sections[name] = _validated(table, checks, filepath, prefix=f"{name}.")

    present = set(values) | {
        f"{name}.{key}" for name, section in sections.items() for key in section
    }
    for key in require:
        if key not in present:
            raise ConfigError(f"Missing required key {key!r} in '{filepath}'.")
    dataset = dict(sections["dataset"])
    if "generator" not in dataset and "csv" not in dataset:
        raise ConfigError(
            f"Missing required key 'dataset.generator' (or 'dataset.csv') in '{filepath}'."
        )

    try:
        split_ratio = dataset.pop("split_ratio", defaults.SPLIT_RATIO)
        csv_path = dataset.pop("csv", None)
        generator = dataset.pop("generator", None)
        if csv_path is not None:
            if generator is not None or dataset:
                raise ConfigError(
                    f"'dataset.csv' cannot be combined with generator settings in '{filepath}'."
                )
            csv_path = os.path.join(os.path.dirname(os.path.abspath(filepath)), csv_path)
            source = DatasetSource(csv_path=csv_path)
        else:
            source = DatasetSource(generator=GeneratorConfig.for_surface(generator, **dataset))
        continuous_range = sections["preprocess"].get("continuous_range", defaults.CONTINUOUS_RANGE)
        if len(continuous_range) != 2:
            raise ConfigError(
                f"Invalid value {continuous_range!r} found in field "
                f"'preprocess.continuous_range' (expected two numbers) in '{filepath}'."
            )
        preprocess = PreprocSpec(
            continuous_range=cast("tuple[float, float]", tuple(map(float, continuous_range)))
        )
        corruption = sections["corruption"]
        cl = corruption.get("cl", list(defaults.CORRUPTION_LEVELS))
        targets = corruption.get("targets", "auto")
        if isinstance(targets, str) and targets not in ("auto", "all", "private"):
            raise ConfigError(
                f"Invalid value {targets!r} found in field 'corruption.targets' "
                f"(expected 'auto', 'all', 'private' or a list of names) in '{filepath}'."
            )
        overrides: dict[str, Any] = {}
        for key in ("seed", "out"):
            if key in values:
                overrides[key] = values[key]
        if "models" in values:
            overrides["models"] = tuple(values["models"])
        if "seeds" in values:
            overrides["seeds"] = tuple(values["seeds"])
        return ExperimentConfig(
            dataset=source,
            preprocess=preprocess,
            corruption_levels=tuple(float(level) for level in cl)
            if isinstance(cl, list)
            else (float(cl),),
            targets=targets if isinstance(targets, str) else tuple(targets),
            noise_variance=float(corruption.get("noise_variance", defaults.NOISE_VARIANCE)),
            split_ratio=float(split_ratio),
            train=TrainConfig(**sections["train"]),
            **overrides,
        )
    except ContractError as e:
        raise ConfigError(f"Invalid configuration in '{filepath}': {e}") from e


def load_experiment_config(
    filepath: str, *, require: Collection[str] = EXPERIMENT_REQUIRED
) -> ExperimentConfig:
    """Read an experiment from TOML (or JSON, by suffix).

    Unknown keys warn; wrong types, missing required keys and invalid values raise
    `ConfigError`.
    """
    filepath = os.path.abspath(filepath)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            data = _read_table(filepath)
        except UserWarning as e:
            raise ConfigError(str(e)) from None
    assert data is not None
    return experiment_config_from_dict(data, filepath, require=require)


CONFIG = ConsoleConfig()
if os.path.exists(CONFIG._USER_FILENAME):
    CONFIG.use_config(CONFIG._USER_FILENAME)
if os.path.exists(CONFIG._LOCAL_FILENAME):
    CONFIG.use_config(CONFIG._LOCAL_FILENAME)
