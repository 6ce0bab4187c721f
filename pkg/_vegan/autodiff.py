"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Operations executed inside an active `Graph` are recorded in execution order,
which is a topological order by construction. Outside a graph every operation
still computes its value but records nothing, so results are constants.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
import contextvars
from dataclasses import dataclass
import types
from typing import Literal, TypeAlias

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from . import defaults as defaults
from .errors import ContractError, DimensionError, NumericDomainError

Array: TypeAlias = npt.NDArray[np.float64]
Operand: TypeAlias = "Tensor | float | int"
OpKind: TypeAlias = Literal[
    "matmul",
    "add",
    "sub",
    "mul",
    "neg",
    "square",
    "mean",
    "sum",
    "log",
    "exp",
    "sigmoid",
    "softplus",
    "elu",
    "relu",
    "concat",
    "clip",
    "rows",
]
Backward: TypeAlias = Callable[[Array], Sequence[Array | None]]

_ACTIVE_GRAPH: contextvars.ContextVar[Graph | None] = contextvars.ContextVar(
    "active_graph", default=None
)


def _check_finite(value: Array, where: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericDomainError(f"Non-finite value produced by {where}.")


class Tensor:
    __slots__ = ("data", "grad", "name", "requires_grad")

    def __init__(
        self, data: npt.ArrayLike, *, requires_grad: bool = False, name: str | None = None
    ) -> None:
        array = np.array(data, dtype=np.float64)
        _check_finite(array, "tensor creation")
        self.data: Array = array
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Array | None = None

    @classmethod
    def _wrap(cls, value: Array, *, requires_grad: bool) -> Tensor:
        tensor = cls.__new__(cls)
        tensor.data = value
        tensor.requires_grad = requires_grad
        tensor.name = None
        tensor.grad = None
        return tensor

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"Only single-element tensors convert to float, got {self.shape}.")
        return float(self.data.reshape(()))

    def numpy(self) -> Array:
        return self.data

    def detach(self) -> Tensor:
        return Tensor._wrap(self.data, requires_grad=False)

    def __repr__(self) -> str:
        label = "" if self.name is None else f"{self.name}, "
        return f"Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: Operand) -> Tensor:
        return add(self, other)

    def __radd__(self, other: Operand) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Operand) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: Operand) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Operand) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: Operand) -> Tensor:
        return mul(other, self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __neg__(self) -> Tensor:
        return neg(self)


@dataclass(frozen=True, slots=True, eq=False)
class Node:
    kind: OpKind
    parents: tuple[Tensor, ...]
    output: Tensor
    backward: Backward


class Graph:
    """Tape of the operations executed while it is active.

    Use as a context manager; `backward` may be called after the block exits.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._tokens: list[contextvars.Token[Graph | None]] = []

    def __enter__(self) -> Graph:
        self._tokens.append(_ACTIVE_GRAPH.set(self))
        return self

    def __exit__(
        self,
        exception_type: type[BaseException] | None,
        exception_value: BaseException | None,
        exception_traceback: types.TracebackType | None,
    ) -> None:
        _ACTIVE_GRAPH.reset(self._tokens.pop())

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def reset(self) -> None:
        self.nodes.clear()

    def leaves(self) -> list[Tensor]:
        """Return the differentiable tensors that no recorded operation produced."""
        produced = {id(node.output) for node in self.nodes}
        seen: set[int] = set()
        leaves = []
        for node in self.nodes:
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in produced and id(parent) not in seen:
                    seen.add(id(parent))
                    leaves.append(parent)
        return leaves

    def backward(self, root: Tensor, leaves: Iterable[Tensor] | None = None) -> dict[Tensor, Array]:
        """Differentiate a scalar `root` with respect to `leaves`.

        Each leaf's `grad` is overwritten with the returned gradient. Leaves that
        the root does not depend on receive zeros of their own shape.
        """
        if root.size != 1:
            raise ContractError(f"Backward needs a scalar root, got shape {root.shape}.")
        if not any(node.output is root for node in self.nodes):
            raise ContractError("The root was not produced inside this graph.")
        grads: dict[int, Array] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for parent, grad in zip(node.parents, node.backward(upstream), strict=True):
                if grad is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + grad
                else:
                    grads[id(parent)] = grad
        targets = self.leaves() if leaves is None else list(leaves)
        result = {}
        for leaf in targets:
            grad = grads.get(id(leaf))
            if grad is None:
                grad = np.zeros_like(leaf.data)
            _check_finite(grad, "backward")
            leaf.grad = grad
            result[leaf] = grad
        return result


def _as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def _record(kind: OpKind, parents: tuple[Tensor, ...], value: Array, backward: Backward) -> Tensor:
    _check_finite(value, kind)
    graph = _ACTIVE_GRAPH.get()
    requires_grad = graph is not None and any(parent.requires_grad for parent in parents)
    output = Tensor._wrap(value, requires_grad=requires_grad)
    if graph is not None and requires_grad:
        graph.record(Node(kind, parents, output, backward))
    return output


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(kind: OpKind, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"Cannot {kind} shapes {a.shape} and {b.shape}.") from None


def add(a: Operand, b: Operand) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    x, y = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", x, y)
    return _record(
        "add",
        (x, y),
        x.data + y.data,
        lambda g: (_unbroadcast(g, x.shape), _unbroadcast(g, y.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    x, y = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", x, y)
    return _record(
        "sub",
        (x, y),
        x.data - y.data,
        lambda g: (_unbroadcast(g, x.shape), _unbroadcast(-g, y.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    x, y = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", x, y)
    return _record(
        "mul",
        (x, y),
        x.data * y.data,
        lambda g: (_unbroadcast(g * y.data, x.shape), _unbroadcast(g * x.data, y.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _record("neg", (a,), -a.data, lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an (n, k) and a (k, m) tensor."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"Cannot matmul shapes {a.shape} and {b.shape}.")
    return _record("matmul", (a, b), a.data @ b.data, lambda g: (g @ b.data.T, a.data.T @ g))


def square(a: Tensor) -> Tensor:
    return _record("square", (a,), a.data * a.data, lambda g: (2.0 * a.data * g,))


def sum(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is not None and not -a.data.ndim <= axis < a.data.ndim:
        raise DimensionError(f"Axis {axis} out of range for shape {a.shape}.")

    def backward(g: Array) -> tuple[Array]:
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record("sum", (a,), np.asarray(a.data.sum(axis=axis)), backward)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is not None and not -a.data.ndim <= axis < a.data.ndim:
        raise DimensionError(f"Axis {axis} out of range for shape {a.shape}.")
    if a.size == 0:
        raise DimensionError("Cannot take the mean of an empty tensor.")
    count = a.size if axis is None else a.shape[axis]

    def backward(g: Array) -> tuple[Array]:
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return _record("mean", (a,), np.asarray(a.data.mean(axis=axis)), backward)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NumericDomainError("log requires strictly positive inputs.")
    return _record("log", (a,), np.log(a.data), lambda g: (g / a.data,))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        value = np.exp(a.data)
    return _record("exp", (a,), value, lambda g: (g * value,))


def sigmoid(a: Tensor) -> Tensor:
    value = expit(a.data)
    return _record("sigmoid", (a,), value, lambda g: (g * value * (1.0 - value),))


def softplus(a: Tensor) -> Tensor:
    return _record("softplus", (a,), np.logaddexp(0.0, a.data), lambda g: (g * expit(a.data),))


def elu(a: Tensor) -> Tensor:
    negative = np.exp(np.minimum(a.data, 0.0))
    value = np.where(a.data > 0, a.data, negative - 1.0)
    return _record("elu", (a,), value, lambda g: (g * np.where(a.data > 0, 1.0, negative),))


def relu(a: Tensor) -> Tensor:
    return _record("relu", (a,), np.maximum(a.data, 0.0), lambda g: (g * (a.data > 0),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise DimensionError("Cannot concatenate an empty sequence.")
    try:
        value = np.concatenate([tensor.data for tensor in tensors], axis=axis)
    except (ValueError, np.exceptions.AxisError) as e:
        shapes = [tensor.shape for tensor in tensors]
        raise DimensionError(f"Cannot concatenate shapes {shapes} on axis {axis}.") from e
    boundaries = np.cumsum([tensor.shape[axis] for tensor in tensors])[:-1]
    return _record(
        "concat",
        tuple(tensors),
        value,
        lambda g: tuple(np.split(g, boundaries, axis=axis)),
    )


def clip(a: Tensor, low: float, high: float) -> Tensor:
    """Clamp into [low, high]; the gradient is zero wherever clamping applied."""
    if low > high:
        raise ContractError(f"Empty clip interval [{low}, {high}].")
    inside = (a.data >= low) & (a.data <= high)
    return _record("clip", (a,), np.clip(a.data, low, high), lambda g: (g * inside,))


def rows(a: Tensor, index: slice | npt.NDArray[np.intp]) -> Tensor:
    """Select rows of a matrix; repeated indices accumulate in the gradient."""
    if a.data.ndim == 0:
        raise DimensionError("Cannot select rows of a scalar.")

    def backward(g: Array) -> tuple[Array]:
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _record("rows", (a,), a.data[index], backward)


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    leaf: Tensor,
    h: float = defaults.FINITE_DIFFERENCE_STEP,
    *,
    floor: float = 1e-8,
) -> float:
    """Compare the gradient of `loss_fn()` w.r.t. `leaf` against central differences.

    Returns the maximum over leaf entries of |numeric - analytic| / (|analytic| + floor).
    `loss_fn` must rebuild its computation on every call.
    """
    if not h > 0:
        raise ContractError(f"Finite difference step must be positive, got {h}.")
    if not floor > 0:
        raise ContractError(f"Relative error floor must be positive, got {floor}.")
    with Graph() as graph:
        root = loss_fn()
    analytic = graph.backward(root, leaves=[leaf])[leaf].reshape(-1)
    flat = leaf.data.reshape(-1)
    if not np.shares_memory(flat, leaf.data):
        raise ContractError("Finite differences need a contiguous leaf.")
    worst = 0.0
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = loss_fn().item()
        flat[i] = original - h
        minus = loss_fn().item()
        flat[i] = original
        numeric = (plus - minus) / (2 * h)
        worst = max(worst, abs(numeric - analytic[i]) / (abs(analytic[i]) + floor))
    return worst
