from collections.abc import Callable
import math
from pathlib import Path

import numpy as np
import pytest

from . import autodiff as ad
from .autodiff import Graph, Tensor
from .data import CausalDataset
from .errors import ContractError, CorruptionError, DimensionError
from .networks import (
    Architecture,
    Batch,
    ModelKind,
    TarnetModel,
    VeganModel,
    build_model,
    build_tarnet,
    build_vegan,
    encode,
    equilibrium_loss,
    kl_to_standard_normal,
    load_model,
    loss_d_beta,
    loss_d_delta,
    loss_generator,
    loss_reconstruction,
    loss_tarnet,
    predict_ite,
    save_model,
)
from .nn import Mlp, MlpSpec, build_mlp

LN2 = math.log(2)


def tiny(n_features: int, latent_dim: int = 3) -> Architecture:
    return Architecture(
        n_features=n_features,
        latent_dim=latent_dim,
        extractor_width=5,
        extractor_layers=2,
        decoder_width=4,
        decoder_layers=1,
        discriminator_width=4,
        discriminator_layers=1,
    )


def constant_half(mlp: Mlp) -> Mlp:
    """Zero every parameter so a sigmoid output is 0.5 everywhere."""
    for parameter in mlp.parameters.values():
        parameter.data[...] = 0.0
    return mlp


def make_batch(ds: CausalDataset, latent_dim: int, size: int = 8) -> Batch:
    index = np.concatenate([ds.treated[: size // 2], ds.control[: size // 2]])
    noise = np.random.default_rng(1).standard_normal((size, latent_dim))
    return Batch(x=ds.x[index], t=ds.t[index], y=ds.y[index], noise=noise)


@pytest.fixture
def vegan(dataset: CausalDataset) -> VeganModel:
    return build_vegan(tiny(dataset.d), seed=0)


@pytest.fixture
def tarnet(dataset: CausalDataset) -> TarnetModel:
    return build_tarnet(tiny(dataset.d), seed=0)


def test_default_architecture_shapes() -> None:
    model = build_vegan(Architecture(n_features=25), seed=7)
    shapes = {name: p.shape for name, p in model.named_parameters().items()}
    assert shapes["g_phi.0.weight"] == (25, 100)
    assert shapes["g_phi.2.weight"] == (100, 100)
    assert shapes["mlp_mu.0.weight"] == (100, 20)
    assert shapes["psi1.0.weight"] == (20, 200)
    assert shapes["psi1.1.weight"] == (200, 200)
    assert shapes["psi1.2.weight"] == (200, 1)
    assert shapes["d_delta.2.weight"] == (100, 1)


def test_build_is_deterministic(dataset: CausalDataset) -> None:
    first = build_vegan(tiny(dataset.d), seed=7).named_parameters()
    second = build_vegan(tiny(dataset.d), seed=7).named_parameters()
    for name, parameter in first.items():
        np.testing.assert_array_equal(parameter.data, second[name].data)


def test_components_get_distinct_initialisations(vegan: VeganModel) -> None:
    assert not np.array_equal(
        vegan.psi1.parameters["0.weight"].data, vegan.psi0.parameters["0.weight"].data
    )


def test_architecture_dict(dataset: CausalDataset) -> None:
    architecture = tiny(dataset.d)
    assert Architecture.from_dict(architecture.to_dict()) == architecture
    with pytest.raises(ContractError, match="latent_dim must be positive"):
        Architecture(n_features=3, latent_dim=0)


def test_zero_noise_gives_posterior_mean(vegan: VeganModel, dataset: CausalDataset) -> None:
    sample = encode(vegan, dataset.x, eps=np.zeros((dataset.n, 3)))
    np.testing.assert_array_equal(sample.z.data, sample.mu.data)


def test_reparameterisation_identity(vegan: VeganModel, dataset: CausalDataset) -> None:
    sample = encode(vegan, dataset.x, rng=np.random.default_rng(0))
    np.testing.assert_array_equal(
        sample.z.data, sample.mu.data + sample.sigma.data * sample.eps
    )
    assert np.all(sample.sigma.data > 0)
    again = encode(vegan, dataset.x, eps=sample.eps)
    np.testing.assert_array_equal(again.z.data, sample.z.data)


def test_latent_shape(dataset: CausalDataset) -> None:
    model = build_vegan(tiny(dataset.d, latent_dim=20), seed=0)
    assert encode(model, dataset.x[:32], rng=np.random.default_rng(0)).z.shape == (32, 20)


def test_encode_needs_noise_source(vegan: VeganModel, dataset: CausalDataset) -> None:
    with pytest.raises(ContractError, match="rng"):
        encode(vegan, dataset.x)
    with pytest.raises(DimensionError, match="eps has shape"):
        encode(vegan, dataset.x, eps=np.zeros((dataset.n, 4)))


def test_width_mismatch(vegan: VeganModel, dataset: CausalDataset) -> None:
    with pytest.raises(DimensionError, match="expects 6 covariates"):
        predict_ite(vegan, dataset.x[:, :5])


def test_kl_of_standard_normal_is_zero() -> None:
    np.testing.assert_allclose(kl_to_standard_normal(np.zeros((2, 3)), np.ones((2, 3))), 0.0)
    assert kl_to_standard_normal(np.ones((1, 2)), np.ones((1, 2)))[0] == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["vegan", "tarnet"])
def test_symmetric_heads_predict_no_effect(kind: str, dataset: CausalDataset) -> None:
    model = build_model(kind, tiny(dataset.d), seed=2)  # type: ignore[arg-type]
    for name, parameter in model.psi0.parameters.items():
        parameter.data = model.psi1.parameters[name].data.copy()
    np.testing.assert_array_equal(predict_ite(model, dataset.x).tau, np.zeros(dataset.n))


def test_inference_is_deterministic(vegan: VeganModel, dataset: CausalDataset) -> None:
    first = predict_ite(vegan, dataset.x)
    second = predict_ite(vegan, dataset.x)
    np.testing.assert_array_equal(first.tau, second.tau)
    np.testing.assert_array_equal(first.tau, first.y1 - first.y0)


def test_sampled_inference(vegan: VeganModel, dataset: CausalDataset) -> None:
    with pytest.raises(ContractError, match="needs `rng`"):
        predict_ite(vegan, dataset.x, samples=4)
    sampled = predict_ite(vegan, dataset.x, samples=4, rng=np.random.default_rng(0))
    assert sampled.tau.shape == (dataset.n,)
    assert not np.array_equal(sampled.tau, predict_ite(vegan, dataset.x).tau)


def test_wiped_out_input_is_refused(vegan: VeganModel, dataset: CausalDataset) -> None:
    with pytest.raises(CorruptionError):
        predict_ite(vegan, np.zeros_like(dataset.x))


def test_reconstruction_of_exact_outcomes() -> None:
    loss = loss_reconstruction(np.array([1.0, 2.0]), Tensor([[1.0], [2.0]]), np.array([1.0, 0.0]))
    assert loss.item() == 0.0


def test_reconstruction_arithmetic() -> None:
    loss = loss_reconstruction(np.array([0.0, 2.0]), Tensor([[0.0], [0.0]]), np.array([1.0, 0.0]))
    assert loss.item() == pytest.approx(1.0)


def test_reconstruction_averages_each_group() -> None:
    t = np.array([1.0, 0.0, 0.0, 0.0])
    loss = loss_reconstruction(np.array([2.0, 0.0, 0.0, 0.0]), Tensor(np.zeros((4, 1))), t)
    assert loss.item() == pytest.approx(1.0)


def test_reconstruction_needs_both_groups() -> None:
    with pytest.raises(ContractError, match="Both treatment groups"):
        loss_reconstruction(np.zeros(2), Tensor(np.zeros((2, 1))), np.ones(2))


def test_constant_discriminator_loss() -> None:
    spec = MlpSpec(layer_sizes=(3, 4, 1), output_activation="sigmoid")
    discriminator = constant_half(build_mlp(spec, 0))
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(5, 3)), Tensor(rng.normal(size=(5, 3)))
    assert loss_d_delta(discriminator, a, b).item() == pytest.approx(2 * LN2)
    assert loss_d_beta(discriminator, Tensor(a), b).item() == pytest.approx(equilibrium_loss())
    assert equilibrium_loss() == pytest.approx(1.3863, abs=1e-4)


def test_perfect_discriminator_loss_vanishes() -> None:
    discriminator = build_mlp(MlpSpec(layer_sizes=(2, 1), output_activation="sigmoid"), 0)
    discriminator.parameters["0.weight"].data[...] = 20.0
    discriminator.parameters["0.bias"].data[...] = 0.0
    loss = loss_d_delta(discriminator, np.ones((4, 2)), Tensor(-np.ones((4, 2))))
    assert 0 < loss.item() < 1e-6


def test_discriminator_batches_must_match() -> None:
    discriminator = build_mlp(MlpSpec(layer_sizes=(2, 1), output_activation="sigmoid"), 0)
    with pytest.raises(DimensionError, match="must match"):
        loss_d_beta(discriminator, Tensor(np.ones((4, 2))), Tensor(np.ones((3, 2))))


def test_d_beta_gradient_matches_finite_differences(vegan: VeganModel) -> None:
    rng = np.random.default_rng(3)
    z_sr, z_tr = Tensor(rng.normal(size=(6, 3))), Tensor(rng.normal(size=(6, 3)) + 1.0)
    for parameter in vegan.d_beta.parameters.values():
        check = ad.finite_difference_check(lambda: loss_d_beta(vegan.d_beta, z_sr, z_tr), parameter)
        assert check < 1e-4


def test_generator_terms_with_constant_discriminators(
    vegan: VeganModel, dataset: CausalDataset
) -> None:
    constant_half(vegan.d_delta)
    constant_half(vegan.d_beta)
    batch = make_batch(dataset, 3)
    without = loss_generator(vegan, batch, rng=np.random.default_rng(0))
    assert without.deception_beta is None
    assert (without.total - without.reconstruction).item() == pytest.approx(LN2)
    with_runtime = loss_generator(vegan, batch, dataset.x[:8], rng=np.random.default_rng(0))
    assert with_runtime.deception_beta is not None
    assert (with_runtime.total - with_runtime.reconstruction).item() == pytest.approx(3 * LN2)
    assert with_runtime.reconstruction.item() == without.reconstruction.item()


def test_frozen_constant_discriminators_add_no_gradient(
    vegan: VeganModel, dataset: CausalDataset
) -> None:
    constant_half(vegan.d_delta)
    constant_half(vegan.d_beta)
    batch = make_batch(dataset, 3)
    leaves = list(vegan.encoder_parameters().values())
    with Graph() as graph:
        full = loss_generator(vegan, batch, dataset.x[:8], rng=np.random.default_rng(0))
    full_grads = graph.backward(full.total, leaves)
    with Graph() as graph:
        plain = loss_generator(vegan, batch, rng=np.random.default_rng(0))
    plain_grads = graph.backward(plain.reconstruction, leaves)
    for leaf in leaves:
        np.testing.assert_allclose(full_grads[leaf], plain_grads[leaf], atol=1e-12)


def test_generator_gradient_matches_finite_differences(
    vegan: VeganModel, dataset: CausalDataset
) -> None:
    batch = make_batch(dataset, 3)

    def loss() -> Tensor:
        return loss_generator(vegan, batch, dataset.x[8:16], rng=np.random.default_rng(5)).total

    for name in ("g_phi.0.weight", "mlp_sigma.0.bias", "psi0.1.weight"):
        assert ad.finite_difference_check(loss, vegan.named_parameters()[name]) < 1e-4


def test_tarnet_without_runtime_is_reconstruction(
    tarnet: TarnetModel, dataset: CausalDataset
) -> None:
    loss = loss_tarnet(tarnet, make_batch(dataset, 3))
    assert loss.deception_delta is None
    assert loss.deception_beta is None
    assert loss.total is loss.reconstruction


def test_tarnet_plus_gradient_reaches_extractor_through_d_beta(
    tarnet: TarnetModel, dataset: CausalDataset
) -> None:
    batch = make_batch(dataset, 3)
    weight = tarnet.extractor.parameters["0.weight"]
    with Graph() as graph:
        plain = loss_tarnet(tarnet, batch)
    plain_grad = graph.backward(plain.total, [weight])[weight]
    with Graph() as graph:
        plus = loss_tarnet(tarnet, batch, dataset.x[8:16])
    plus_grad = graph.backward(plus.total, [weight])[weight]
    assert not np.allclose(plain_grad, plus_grad)
    check = ad.finite_difference_check(
        lambda: loss_tarnet(tarnet, batch, dataset.x[8:16]).total, weight
    )
    assert check < 1e-4


GRADIENT_POINTS = 100
# Relative errors are measured against |gradient| + floor; roundoff alone stays far below it.
GRADIENT_FLOOR = 1e-5


def random_batch(rng: np.random.Generator, n_features: int, latent_dim: int) -> Batch:
    return Batch(
        x=rng.uniform(0.05, 1.0, size=(6, n_features)),
        t=np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]),
        y=rng.normal(size=6),
        noise=rng.standard_normal((6, latent_dim)),
    )


def component_loss(
    kind: ModelKind, component: str, point: int
) -> tuple[Callable[[], Tensor], Mlp]:
    """A training loss of `component` at a fresh random parameter point."""
    architecture = tiny(4, latent_dim=2)
    rng = np.random.default_rng(point)
    batch = random_batch(rng, 4, 2)
    runtime = rng.uniform(0.05, 1.0, size=(6, 4))
    model = build_model(kind, architecture, seed=point)
    mlp = getattr(model, component)
    if isinstance(model, VeganModel):
        vegan = model
        if component == "d_delta":
            z = Tensor(rng.normal(size=(6, 2)))
            return lambda: loss_d_delta(vegan.d_delta, batch.noise, z), mlp
        if component == "d_beta":
            z_sr, z_tr = Tensor(rng.normal(size=(6, 2))), Tensor(rng.normal(1.0, 1.0, (6, 2)))
            return lambda: loss_d_beta(vegan.d_beta, z_sr, z_tr), mlp
        eps_seed = int(rng.integers(1 << 31))
        return (
            lambda: loss_generator(
                vegan, batch, runtime, rng=np.random.default_rng(eps_seed)
            ).total,
            mlp,
        )
    assert isinstance(model, TarnetModel)
    tarnet = model
    if component == "d_beta":
        features = Tensor(tarnet.represent(Tensor(batch.x)).numpy())
        runtime_features = Tensor(tarnet.represent(Tensor(runtime)).numpy())
        return lambda: loss_d_beta(tarnet.d_beta, features, runtime_features), mlp
    return lambda: loss_tarnet(tarnet, batch, runtime).total, mlp


@pytest.mark.parametrize(
    "kind, component",
    [
        ("vegan", "g_phi"),
        ("vegan", "mlp_mu"),
        ("vegan", "mlp_sigma"),
        ("vegan", "psi1"),
        ("vegan", "psi0"),
        ("vegan", "d_delta"),
        ("vegan", "d_beta"),
        ("tarnet", "extractor"),
        ("tarnet", "psi1"),
        ("tarnet", "psi0"),
        ("tarnet", "d_beta"),
    ],
)
@pytest.mark.timeout(300)
def test_component_gradients_match_finite_differences(kind: ModelKind, component: str) -> None:
    for point in range(GRADIENT_POINTS):
        loss, mlp = component_loss(kind, component, point)
        for name, parameter in mlp.parameters.items():
            check = ad.finite_difference_check(loss, parameter, floor=GRADIENT_FLOOR)
            assert check < 1e-4, f"{component}.{name} at point {point}"


@pytest.mark.parametrize("kind", ["vegan", "tarnet"])
def test_saved_model_predicts_identically(
    kind: str, dataset: CausalDataset, tmp_path: Path
) -> None:
    model = build_model(kind, tiny(dataset.d), seed=4)  # type: ignore[arg-type]
    path = tmp_path / "model.json"
    save_model(model, path, {"model": kind})
    loaded, metadata = load_model(path)
    assert type(loaded) is type(model)
    assert metadata["model"] == kind
    assert metadata["architecture"] == model.architecture.to_dict()
    np.testing.assert_array_equal(
        predict_ite(loaded, dataset.x).tau, predict_ite(model, dataset.x).tau
    )
