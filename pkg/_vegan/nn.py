from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
import itertools
import json
import os
from typing import Any, Literal, TypeAlias

import numpy as np

from . import autodiff as ad
from . import defaults as defaults
from .autodiff import Array, Tensor
from .errors import ContractError, DimensionError, ParseError

Activation: TypeAlias = Literal["elu", "relu"]
OutputActivation: TypeAlias = Literal["identity", "sigmoid", "softplus"]
OptimizerKind: TypeAlias = Literal["sgd", "adam"]

CHECKPOINT_FORMAT = "vegan-checkpoint/1"

_ACTIVATIONS = {"elu": ad.elu, "relu": ad.relu}
_OUTPUT_ACTIVATIONS = {"identity": None, "sigmoid": ad.sigmoid, "softplus": ad.softplus}


@dataclass(frozen=True, kw_only=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    activation: Activation = "elu"
    output_activation: OutputActivation = "identity"

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_sizes", tuple(self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ContractError(
                f"An MLP needs at least an input and an output width, got {list(self.layer_sizes)}."
            )
        if any(width < 1 for width in self.layer_sizes):
            raise ContractError(f"Layer widths must be positive, got {list(self.layer_sizes)}.")
        if self.activation not in _ACTIVATIONS:
            raise ContractError(f"Unknown activation {self.activation!r}.")
        if self.output_activation not in _OUTPUT_ACTIVATIONS:
            raise ContractError(f"Unknown output activation {self.output_activation!r}.")

    @property
    def input_width(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_width(self) -> int:
        return self.layer_sizes[-1]


class Mlp:
    """Fully connected network; parameters are named `{layer}.weight` and `{layer}.bias`."""

    def __init__(self, spec: MlpSpec, parameters: dict[str, Tensor]) -> None:
        self.spec = spec
        self.parameters = parameters

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.spec.input_width:
            raise DimensionError(
                f"Expected input with {self.spec.input_width} columns, got shape {x.shape}."
            )
        hidden = _ACTIVATIONS[self.spec.activation]
        num_layers = len(self.spec.layer_sizes) - 1
        for layer in range(num_layers):
            x = x @ self.parameters[f"{layer}.weight"] + self.parameters[f"{layer}.bias"]
            if layer < num_layers - 1:
                x = hidden(x)
        output = _OUTPUT_ACTIVATIONS[self.spec.output_activation]
        if output is not None:
            x = output(x)
        return x

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, parameter in self.parameters.items():
            yield prefix + name, parameter


def build_mlp(spec: MlpSpec, seed: int) -> Mlp:
    """Glorot-uniform weights of shape (fan_in, fan_out) and zero biases."""
    rng = np.random.default_rng(seed)
    parameters = {}
    for layer, (fan_in, fan_out) in enumerate(itertools.pairwise(spec.layer_sizes)):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        parameters[f"{layer}.weight"] = Tensor(weight, requires_grad=True, name=f"{layer}.weight")
        parameters[f"{layer}.bias"] = Tensor(
            np.zeros((1, fan_out)), requires_grad=True, name=f"{layer}.bias"
        )
    return Mlp(spec, parameters)


@dataclass(kw_only=True)
class OptimizerState:
    kind: OptimizerKind = "adam"
    learning_rate: float = defaults.LEARNING_RATE
    weight_decay: float = defaults.WEIGHT_DECAY
    betas: tuple[float, float] = defaults.ADAM_BETAS
    epsilon: float = defaults.ADAM_EPSILON
    first_moments: dict[str, Array] = field(default_factory=dict)
    second_moments: dict[str, Array] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("sgd", "adam"):
            raise ContractError(f"Unknown optimizer {self.kind!r}. Please, choose 'sgd' or 'adam'.")
        if not self.learning_rate > 0:
            raise ContractError(f"Learning rate must be positive, got {self.learning_rate}.")
        if self.weight_decay < 0:
            raise ContractError(f"Weight decay must be non-negative, got {self.weight_decay}.")


def optimizer_step(
    state: OptimizerState, params: Mapping[str, Tensor], grads: Mapping[str, Array]
) -> Mapping[str, Tensor]:
    """Update `params` in place.

    sgd:  p <- p - lr * (g + wd * p)
    adam: bias-corrected moments with decoupled weight decay,
          p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
    """
    missing = [name for name in params if name not in grads]
    if missing:
        raise ContractError(f"Missing gradients for {missing}.")
    state.step += 1
    lr, wd = state.learning_rate, state.weight_decay
    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.data.shape:
            raise DimensionError(
                f"Gradient for {name!r} has shape {grad.shape}, expected {param.data.shape}."
            )
        if state.kind == "sgd":
            param.data -= lr * (grad + wd * param.data)
            continue
        beta1, beta2 = state.betas
        m = state.first_moments.get(name, np.zeros_like(grad))
        v = state.second_moments.get(name, np.zeros_like(grad))
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        state.first_moments[name] = m
        state.second_moments[name] = v
        m_hat = m / (1 - beta1**state.step)
        v_hat = v / (1 - beta2**state.step)
        param.data -= lr * (m_hat / (np.sqrt(v_hat) + state.epsilon) + wd * param.data)
    return params


def save_checkpoint(
    path: str | os.PathLike[str], params: Mapping[str, Tensor], metadata: Mapping[str, Any]
) -> None:
    """Write parameters as an ordered list of (name, shape, row-major values)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "metadata": dict(metadata),
        "parameters": [
            {
                "name": name,
                "shape": list(param.shape),
                "values": param.data.reshape(-1).tolist(),
            }
            for name, param in params.items()
        ],
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_checkpoint(path: str | os.PathLike[str]) -> tuple[dict[str, Array], dict[str, Any]]:
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid checkpoint '{path}' at line {e.lineno}: {e.msg}.") from e
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"'{path}' is not a {CHECKPOINT_FORMAT} file.")
    arrays = {}
    for entry in payload["parameters"]:
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise ParseError(f"Parameter {entry['name']!r} in '{path}' does not match its shape.")
        arrays[entry["name"]] = values.reshape(shape)
    return arrays, payload["metadata"]


def assign_parameters(params: Mapping[str, Tensor], arrays: Mapping[str, Array]) -> None:
    missing = sorted(set(params) - set(arrays))
    if missing:
        raise ParseError(f"Checkpoint is missing parameters {missing}.")
    for name, param in params.items():
        if arrays[name].shape != param.data.shape:
            raise DimensionError(
                f"Checkpoint parameter {name!r} has shape {arrays[name].shape}, "
                f"expected {param.data.shape}."
            )
        param.data = arrays[name].copy()

