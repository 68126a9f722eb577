import numpy as np
import pytest

import hypothesis.strategies as st
from hypothesis import given, settings

from src.common.errors import (
    ConfigError,
    FrictionBoundError,
    MatrixShapeError,
    ModelBoundError,
    ToleranceError,
    UnstableMatrixError,
)
from src.models import (
    MODEL_CATALOG,
    CellularModel,
    FunctionalModel,
    NoiseSpec,
    PipeModel,
    RadialProfile,
    TranslationalModel,
    TrigonometricScalarModel,
    VortexModel,
    as_coefficient_model,
    create_model,
    fd_derivatives,
)
from src.models.turbulence import lattice_points

TURBULENCE = [
    VortexModel(),
    VortexModel(RadialProfile("linear", cutoff_radius=1.5)),
    VortexModel(RadialProfile("gaussian", length=0.8)),
    CellularModel(2.0, 3.0),
    TranslationalModel(((1.0, 2.0), (0.5, -1.0))),
    PipeModel(),
]


def central_jacobian(func, x, h=1e-6):
    columns = []
    for l in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[l] = h
        columns.append((func(x + e) - func(x - e)) / (2 * h))
    return np.stack(columns, axis=-1)


def test_noise_spec_validation():
    noise = NoiseSpec.identity(2)
    assert noise.n == 2 and noise.m == 2
    assert noise.is_identity_relaxation
    assert noise.spectral_gap == pytest.approx(1.0)

    with pytest.raises(UnstableMatrixError):
        NoiseSpec(np.diag([1.0, -0.1]), np.eye(2))
    with pytest.raises(MatrixShapeError):
        NoiseSpec(np.eye(2), np.ones((3, 1)))


@pytest.mark.parametrize("name", sorted(MODEL_CATALOG))
def test_catalog_models_build(name):
    bundle = create_model(name)
    model = bundle.model
    assert bundle.noise.n == model.noise_dim
    points = lattice_points(5, 1.0)[:, : model.dim] if model.dim == 2 else np.linspace(-3, 3, 13)[:, None]
    model.check_friction(points)
    assert model.b(points).shape == points.shape
    assert model.sigma(points).shape == (len(points), model.dim, model.noise_dim)
    assert (bundle.turbulence is not None) == (name in ("vortex", "cellular", "pipe", "translational"))


def test_lambda_alias_and_noise_override():
    bundle = create_model("scalar", {"lambda": 3.0})
    assert bundle.model.lam == 3.0
    bundle = create_model("constant", {"gamma": [[2.0, 0.5], [-0.5, 1.0]], "sigma": np.eye(2).tolist()},
                          noise={"A": [[2.0, 0.0], [1.0, 1.0]], "B": [[1.0], [0.0]]})
    assert bundle.noise.m == 1
    assert bundle.model.gamma0 == pytest.approx(1.0)
    assert create_model("cellular", noise="identity").noise.n == 1


@pytest.mark.parametrize(
    "name, params, noise, key_path",
    [
        ("swirl", {}, None, "model.name"),
        ("scalar", {"frequency": 2.0}, None, "model.params.frequency"),
        ("scalar", {}, {"A": np.eye(2).tolist(), "B": np.eye(2).tolist()}, "noise"),
        ("scalar", {}, {"A": [[1.0]], "C": [[1.0]]}, "noise.C"),
        ("scalar", {}, {"A": [[-1.0]], "B": [[1.0]]}, "noise"),
        ("scalar", {}, "white", "noise"),
    ],
)
def test_create_model_errors(name, params, noise, key_path):
    with pytest.raises(ConfigError) as info:
        create_model(name, params, noise)
    assert info.value.key_path == key_path


def test_friction_bounds():
    with pytest.raises(FrictionBoundError):
        FunctionalModel(np.zeros(1), [[1.0]], [[1.0]], 1, 1, gamma0=2.0, gamma1=1.0)
    model = FunctionalModel(np.zeros(1), [[1.0]], [[1.0]], 1, 1, gamma0=2.0, gamma1=3.0)
    with pytest.raises(FrictionBoundError):
        model.check_friction(np.zeros((3, 1)))


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    d=st.integers(min_value=1, max_value=2),
    n=st.integers(min_value=1, max_value=3),
)
def test_analytic_derivatives_match_finite_differences(seed, d, n):
    rng = np.random.default_rng(seed)
    model = TrigonometricScalarModel(d, n, rng)
    x = rng.uniform(-2.0, 2.0, size=(4, d))
    analytic = model.analytic_derivatives(x)
    numeric = fd_derivatives(model, x)
    np.testing.assert_allclose(numeric.d_gamma_inv, analytic.d_gamma_inv, atol=1e-6)
    np.testing.assert_allclose(numeric.d_gamma_inv_sigma, analytic.d_gamma_inv_sigma, atol=1e-6)


def test_fd_derivatives_detect_kinks():
    model = FunctionalModel(
        b=np.zeros(1),
        gamma=lambda x: (1.0 + (x[..., 0] > 0.0))[..., None, None],
        sigma=np.ones((1, 1)),
        dim=1,
        noise_dim=1,
        gamma0=1.0,
        gamma1=2.0,
    )
    with pytest.raises(ToleranceError):
        fd_derivatives(model, np.array([0.0]))


def test_points_shape_is_checked():
    model = create_model("vortex").model
    with pytest.raises(MatrixShapeError):
        model.gamma(np.zeros(3))


@pytest.mark.parametrize("turbulence", TURBULENCE, ids=lambda t: t.name)
def test_fields_are_divergence_free(turbulence):
    points = lattice_points(15, 2.5)
    assert np.max(np.abs(turbulence.divergence(points))) <= 1e-12
    turbulence.check(points)


@pytest.mark.parametrize("turbulence", TURBULENCE, ids=lambda t: t.name)
def test_field_jacobians_match_central_differences(turbulence):
    points = lattice_points(9, 2.0) + 0.013
    numeric = central_jacobian(turbulence.fields, points)
    np.testing.assert_allclose(turbulence.field_jacobians(points), numeric, atol=1e-6)
    numeric_grad = central_jacobian(turbulence.turbulent_energy, points)
    np.testing.assert_allclose(turbulence.turbulent_energy_grad(points), numeric_grad, atol=1e-6)


def test_cellular_centrifugal_closed_form():
    model = CellularModel(1.5, 0.7)
    points = lattice_points(11, 3.0)
    np.testing.assert_allclose(model.centrifugal(points), model.centrifugal_closed_form(points), atol=1e-13)
    assert np.all(model.decay_bracket(points) >= 0.0)


def test_pipe_energy_profile():
    pipe = PipeModel()
    centre = pipe.turbulent_energy(np.array([0.0, 0.0]))
    assert centre == pytest.approx(1.5, abs=1e-14)
    assert pipe.turbulent_energy(np.array([0.0, 0.5])) == pytest.approx(1.25, abs=1e-12)
    # the smooth clamp lifts the wall value slightly above the floor
    wall = pipe.turbulent_energy(np.array([[0.0, 1.0], [0.0, -1.0]]))
    np.testing.assert_allclose(wall, pipe.floor + pipe.smoothing * np.log(2.0), rtol=1e-12)
    far = pipe.turbulent_energy(np.array([[0.0, 3.0], [1.0, -5.0]]))
    assert np.all(far >= pipe.floor)
    np.testing.assert_allclose(far, pipe.floor, atol=1e-12)
    np.testing.assert_allclose(pipe.correlation(np.zeros((3, 2))), np.broadcast_to(np.eye(2), (3, 2, 2)))
    np.testing.assert_array_equal(PipeModel(mean_speed=2.0).mean_flow(np.array([[0.0, 1.5]])), [[0.0, 0.0]])


@pytest.mark.parametrize(
    "factory",
    [lambda: PipeModel(peak=0.4), lambda: CellularModel(k1=0.0), lambda: VortexModel(c0=-1.0),
     lambda: TranslationalModel(((0.0, 0.0),))],
)
def test_turbulence_bounds(factory):
    with pytest.raises(ModelBoundError):
        factory()


def test_general_view_matches_scalar_view():
    turbulence = CellularModel(1.0, 2.0, lam=1.5)
    scalar = as_coefficient_model(turbulence)
    general = as_coefficient_model(turbulence, "general")
    points = lattice_points(7, 2.0)
    np.testing.assert_allclose(general.gamma(points), scalar.gamma(points))
    np.testing.assert_allclose(general.sigma(points), scalar.sigma(points))
    assert scalar.gamma0 == pytest.approx(1.5)
    assert general.analytic_derivatives(points) is None
