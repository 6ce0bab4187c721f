from collections.abc import Callable

import numpy as np
import pytest

from . import autodiff as ad
from .autodiff import Graph, Tensor
from .errors import ContractError, DimensionError, NumericDomainError


def leaf(values: object) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def test_matmul_identity() -> None:
    a = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(ad.matmul(Tensor(np.eye(3)), Tensor(a)).numpy(), a)


def test_sigmoid_at_zero() -> None:
    assert ad.sigmoid(Tensor(0.0)).item() == 0.5


def test_mean_of_squares() -> None:
    assert ad.mean(ad.square(Tensor([1.0, 2.0, 3.0]))).item() == pytest.approx(14 / 3)


def test_square_gradient() -> None:
    x = leaf(3.0)
    with Graph() as graph:
        root = ad.square(x)
    grads = graph.backward(root)
    assert grads[x] == pytest.approx(6.0)
    assert x.grad == pytest.approx(6.0)


def test_constant_root_gives_zero_gradient() -> None:
    x = leaf([1.0, 2.0])
    y = leaf([3.0, 4.0])
    with Graph() as graph:
        root = ad.sum(ad.square(y))
    grads = graph.backward(root, leaves=[x, y])
    np.testing.assert_array_equal(grads[x], np.zeros(2))
    np.testing.assert_allclose(grads[y], [6.0, 8.0])


def test_every_leaf_gets_gradient_of_its_shape() -> None:
    w = leaf(np.ones((3, 2)))
    b = leaf(np.zeros((1, 2)))
    x = Tensor(np.ones((4, 3)))
    with Graph() as graph:
        root = ad.mean(ad.sigmoid(x @ w + b))
    graph.backward(root)
    for tensor in (w, b):
        assert tensor.grad is not None
        assert tensor.grad.shape == tensor.shape


def test_shared_subexpression_accumulates() -> None:
    x = leaf(2.0)
    with Graph() as graph:
        root = x * x + x
    assert graph.backward(root)[x] == pytest.approx(5.0)


def test_non_scalar_root_is_rejected() -> None:
    x = leaf([1.0, 2.0])
    with Graph() as graph:
        root = ad.square(x)
    with pytest.raises(ContractError, match="scalar root"):
        graph.backward(root)


def test_root_from_other_graph_is_rejected() -> None:
    x = leaf(1.0)
    with Graph():
        root = ad.square(x)
    with Graph() as other, pytest.raises(ContractError, match="not produced inside this graph"):
        other.backward(root)


def test_graph_reusable_after_reset() -> None:
    x = leaf(2.0)
    with Graph() as graph:
        first = ad.square(x)
    assert graph.backward(first)[x] == pytest.approx(4.0)
    graph.reset()
    assert graph.nodes == []
    with graph:
        second = ad.exp(x)
    assert graph.backward(second)[x] == pytest.approx(np.exp(2.0))


def test_operations_outside_graph_are_constants() -> None:
    x = leaf(2.0)
    y = ad.square(x)
    assert not y.requires_grad


@pytest.mark.parametrize(
    "a_shape, b_shape",
    [((2, 3), (3, 2)), ((2,), (3,)), ((4, 1, 3), (2, 3, 3))],
)
def test_broadcast_mismatch_raises(a_shape: tuple[int, ...], b_shape: tuple[int, ...]) -> None:
    a = Tensor(np.ones(a_shape))
    b = Tensor(np.ones(b_shape))
    with pytest.raises(DimensionError):
        ad.add(a, b)
    with pytest.raises(DimensionError):
        ad.mul(a, b)


def test_matmul_shape_mismatch() -> None:
    with pytest.raises(DimensionError, match="Cannot matmul"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_log_of_non_positive_raises() -> None:
    with pytest.raises(NumericDomainError, match="strictly positive"):
        ad.log(Tensor([1.0, 0.0]))


def test_non_finite_tensor_is_rejected() -> None:
    with pytest.raises(NumericDomainError):
        Tensor([1.0, np.nan])


def test_overflow_is_flagged() -> None:
    with pytest.raises(NumericDomainError, match="exp"):
        ad.exp(Tensor([1000.0]))


def test_item_requires_single_element() -> None:
    with pytest.raises(ContractError):
        Tensor([1.0, 2.0]).item()


def test_clip_gradient_vanishes_outside_interval() -> None:
    x = leaf([-1.0, 0.5, 2.0])
    with Graph() as graph:
        root = ad.sum(ad.clip(x, 0.0, 1.0))
    np.testing.assert_array_equal(graph.backward(root)[x], [0.0, 1.0, 0.0])


def test_rows_gradient_accumulates_repeats() -> None:
    x = leaf(np.ones((3, 2)))
    with Graph() as graph:
        root = ad.sum(ad.rows(x, np.array([0, 0, 2])))
    np.testing.assert_array_equal(graph.backward(root)[x], [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]])


def test_concat_splits_gradient() -> None:
    a = leaf(np.ones((2, 2)))
    b = leaf(np.ones((2, 1)))
    with Graph() as graph:
        root = ad.sum(ad.concat([a, b * 3.0], axis=1))
    grads = graph.backward(root)
    np.testing.assert_array_equal(grads[a], np.ones((2, 2)))
    np.testing.assert_array_equal(grads[b], np.full((2, 1), 3.0))


UNARY_OPS: dict[str, Callable[[Tensor], Tensor]] = {
    "square": ad.square,
    "exp": ad.exp,
    "sigmoid": ad.sigmoid,
    "softplus": ad.softplus,
    "elu": ad.elu,
    "relu": ad.relu,
    "neg": ad.neg,
    "mean_axis": lambda t: ad.mean(t, axis=0),
    "sum_axis": lambda t: ad.sum(t, axis=1),
}


@pytest.mark.parametrize("name", sorted(UNARY_OPS))
def test_unary_op_matches_finite_differences(name: str) -> None:
    rng = np.random.default_rng(len(name))
    op = UNARY_OPS[name]
    x = leaf(rng.uniform(0.2, 1.5, size=(3, 4)) * rng.choice([-1.0, 1.0], size=(3, 4)))
    weights = Tensor(rng.normal(size=op(x).shape))
    assert ad.finite_difference_check(lambda: ad.sum(op(x) * weights), x) < 1e-4


def test_log_matches_finite_differences() -> None:
    x = leaf(np.random.default_rng(1).uniform(0.5, 2.0, size=(2, 3)))
    assert ad.finite_difference_check(lambda: ad.sum(ad.log(x)), x) < 1e-4


@pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul])
def test_binary_broadcast_ops_match_finite_differences(
    op: Callable[[Tensor, Tensor], Tensor],
) -> None:
    rng = np.random.default_rng(4)
    a = leaf(rng.normal(size=(3, 4)))
    b = leaf(rng.normal(size=(1, 4)))
    weights = Tensor(rng.normal(size=(3, 4)))
    for target in (a, b):
        assert ad.finite_difference_check(lambda: ad.sum(op(a, b) * weights), target) < 1e-4


def test_sum_of_sigmoid_matches_finite_differences() -> None:
    rng = np.random.default_rng(0)
    w = leaf(rng.normal(size=(5, 3)))
    x = Tensor(rng.normal(size=(4, 5)))
    assert ad.finite_difference_check(lambda: ad.sum(ad.sigmoid(x @ w)), w) < 1e-4


@pytest.mark.parametrize("seed", range(100))
def test_matmul_matches_finite_differences_at_random_points(seed: int) -> None:
    rng = np.random.default_rng(seed)
    w = leaf(rng.normal(size=(3, 2)))
    x = leaf(rng.normal(size=(2, 3)))
    for target in (w, x):
        assert ad.finite_difference_check(lambda: ad.sum(ad.square(x @ w)), target) < 1e-4


def test_linear_function_is_exact() -> None:
    x = leaf([0.5, -0.25, 2.0])
    coefficients = Tensor([1.0, 2.0, 4.0])
    check = ad.finite_difference_check(lambda: ad.sum(x * coefficients), x, h=2.0**-17)
    assert check < 1e-10


@pytest.mark.parametrize("h", [0.0, -1e-5])
def test_non_positive_step_is_rejected(h: float) -> None:
    x = leaf([1.0])
    with pytest.raises(ContractError, match="must be positive"):
        ad.finite_difference_check(lambda: ad.sum(x), x, h=h)


def test_floor_bounds_relative_error_of_vanishing_gradients() -> None:
    x = leaf([1.0, 0.0])

    def loss() -> Tensor:
        return ad.sum(x * x * x)

    # The cube has a vanishing gradient at 0, where the central difference is h^2.
    assert ad.finite_difference_check(loss, x) > 1e-3
    assert ad.finite_difference_check(loss, x, floor=1e-3) < 1e-4
    with pytest.raises(ContractError, match="floor must be positive"):
        ad.finite_difference_check(loss, x, floor=0.0)
