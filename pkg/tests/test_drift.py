import math

import numpy as np
import pytest

import hypothesis.strategies as st
from hypothesis import given, settings

from src.common.errors import ClosedFormError, ConfigError
from src.drift import (
    DriftProvider,
    MixingRate,
    assemble_Q_alpha,
    cellular_diagnostics,
    compute_drift_matrices,
    drift_divergence,
    format_alpha,
    inertial_drift,
    parse_alpha,
    scalar_drift,
    turbophoretic_alignment,
    turbulence_drift,
)
from src.linalg import spectral_abscissa
from src.models import (
    CallableScalarModel,
    CellularModel,
    FunctionalModel,
    NoiseSpec,
    PipeModel,
    TranslationalModel,
    TrigonometricScalarModel,
    VortexModel,
    as_coefficient_model,
    create_model,
    fd_derivatives,
)
from src.models.turbulence import RadialProfile, lattice_points
from src.sde import limit_step

seeds = st.integers(min_value=0, max_value=2**32 - 1)
ALPHAS = [0.0, 0.3, 1.0, 5.0, math.inf]


def random_problem(rng, d, n, m):
    P = rng.normal(size=(d, d))
    K = rng.normal(size=(d, d))
    gamma = P @ P.T + np.eye(d) + 0.5 * (K - K.T)
    sym = np.linalg.eigvalsh(0.5 * (gamma + gamma.T))
    model = FunctionalModel(
        b=np.zeros(d), gamma=gamma, sigma=rng.normal(size=(d, n)), dim=d, noise_dim=n,
        gamma0=float(sym.min()), gamma1=float(sym.max()),
    )
    R = rng.normal(size=(n, n))
    A = R + (spectral_abscissa(-R) + 0.5) * np.eye(n)
    return model, NoiseSpec(A, rng.normal(size=(n, m)))


def test_scalar_example():
    bundle = create_model("scalar")
    matrices = compute_drift_matrices(bundle.model, bundle.noise, 1.0, [0.0])
    assert matrices.M[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert matrices.L_alpha[0, 0] == pytest.approx(1.0 / 6.0, abs=1e-12)
    assert matrices.N_alpha[0, 0] == pytest.approx(1.0 / 12.0, abs=1e-12)
    assert matrices.alphaN[0, 0] == pytest.approx(1.0 / 12.0, abs=1e-12)


def test_scalar_endpoints():
    bundle = create_model("scalar")
    model, noise = bundle.model, bundle.noise
    zero = compute_drift_matrices(model, noise, 0.0, [0.0])
    assert zero.L_alpha[0, 0] == pytest.approx(0.25, abs=1e-14)
    assert zero.N_alpha[0, 0] == pytest.approx(0.125, abs=1e-14)
    assert zero.alphaN[0, 0] == 0.0
    inf = compute_drift_matrices(model, noise, "inf", [0.0])
    assert inf.L_alpha[0, 0] == 0.0
    assert inf.N_alpha[0, 0] == 0.0
    assert inf.alphaN[0, 0] == pytest.approx(0.25, abs=1e-14)


def test_scalar_continuity_at_endpoints():
    bundle = create_model("scalar")
    model, noise = bundle.model, bundle.noise
    small = compute_drift_matrices(model, noise, 1e-6, [0.0])
    large = compute_drift_matrices(model, noise, 1e6, [0.0])
    # L = 1 / (2 (2 + alpha)) and alpha N = alpha / (4 (2 + alpha))
    assert abs(small.L_alpha[0, 0] / 0.25 - 1.0) <= 1e-6
    assert abs(small.alphaN[0, 0]) <= 1e-6
    assert abs(large.alphaN[0, 0] / 0.25 - 1.0) <= 3e-6
    assert abs(large.L_alpha[0, 0]) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(1, 3), n=st.integers(1, 3), m=st.integers(1, 3))
def test_general_continuity_at_endpoints(seed, d, n, m):
    model, noise = random_problem(np.random.default_rng(seed), d, n, m)
    x = np.zeros(d)
    zero = compute_drift_matrices(model, noise, 0.0, x)
    small = compute_drift_matrices(model, noise, 1e-7, x)
    inf = compute_drift_matrices(model, noise, math.inf, x)
    large = compute_drift_matrices(model, noise, 1e7, x)
    scale = 1.0 + np.max(np.abs(zero.L_alpha))
    np.testing.assert_allclose(small.L_alpha, zero.L_alpha, atol=1e-4 * scale)
    scale = 1.0 + np.max(np.abs(inf.alphaN))
    np.testing.assert_allclose(large.alphaN, inf.alphaN, atol=1e-4 * scale)


@settings(max_examples=25, deadline=None)
@given(
    seed=seeds, d=st.integers(1, 3), n=st.integers(1, 3), m=st.integers(1, 2),
    alpha=st.floats(min_value=0.1, max_value=10.0),
)
def test_block_solves_agree_with_joint_covariance(seed, d, n, m, alpha):
    model, noise = random_problem(np.random.default_rng(seed), d, n, m)
    x = np.zeros(d)
    matrices = compute_drift_matrices(model, noise, alpha, x)
    Q = assemble_Q_alpha(model, noise, alpha, x)
    scale = 1.0 + np.max(np.abs(Q))
    np.testing.assert_allclose(Q[:d, :d], matrices.N_alpha, atol=1e-8 * scale)
    np.testing.assert_allclose(Q[:d, d:], matrices.L_alpha, atol=1e-8 * scale)
    np.testing.assert_allclose(Q[d:, d:], matrices.M, atol=1e-8 * scale)


def test_joint_covariance_needs_finite_positive_alpha():
    bundle = create_model("scalar")
    for alpha in (0.0, math.inf):
        with pytest.raises(ConfigError):
            assemble_Q_alpha(bundle.model, bundle.noise, alpha, [0.0])


@settings(max_examples=25, deadline=None)
@given(seed=seeds, d=st.integers(1, 3), n=st.integers(1, 3), m=st.integers(1, 3))
def test_scalar_closed_form_matches_general_contraction(seed, d, n, m):
    rng = np.random.default_rng(seed)
    model = TrigonometricScalarModel(d, n, rng)
    noise = NoiseSpec(np.eye(n), rng.normal(size=(n, m)))
    x = rng.uniform(-3.0, 3.0, size=(5, d))
    for alpha in ALPHAS:
        closed = scalar_drift(model, noise, alpha, x)
        general = inertial_drift(model, noise, alpha, x)
        np.testing.assert_allclose(general, closed, atol=1e-8 * (1.0 + np.max(np.abs(closed))))


def test_scalar_closed_form_preconditions():
    model, noise = random_problem(np.random.default_rng(1), 2, 2, 2)
    with pytest.raises(ClosedFormError):
        scalar_drift(model, noise, 1.0, np.zeros(2))
    bundle = create_model("scalar-sine", noise={"A": [[2.0]], "B": [[1.0]]})
    with pytest.raises(ClosedFormError):
        scalar_drift(bundle.model, bundle.noise, 1.0, [0.0])


def test_constant_coefficients_give_no_drift():
    model, noise = random_problem(np.random.default_rng(5), 2, 3, 2)
    for alpha in ALPHAS:
        np.testing.assert_array_equal(inertial_drift(model, noise, alpha, np.zeros((4, 2))), 0.0)


def test_vortex_example():
    bundle = create_model("vortex")
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(inertial_drift(bundle.model, bundle.noise, 1.0, x), [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(turbulence_drift(bundle.turbulence, 1.0, x), [1.0, 0.0], atol=1e-12)


def linear_friction_model():
    # lambda(x) = 2 + x with xi = 1, so sigma = lambda
    return CallableScalarModel(
        friction=lambda x: 2.0 + x[..., 0],
        friction_grad=lambda x: np.ones(x.shape),
        xi=lambda x: np.ones(x.shape[:-1] + (1, 1)),
        xi_jacobian=lambda x: np.zeros(x.shape[:-1] + (1, 1, 1)),
        dim=1,
        noise_dim=1,
        lambda0=1.0,
        lambda1=3.0,
        name="linear-friction",
    )


def test_linear_friction_example():
    model = linear_friction_model()
    noise = NoiseSpec(1.0, 1.0)
    x = np.array([0.0])
    assert model.analytic_derivatives(x).d_gamma_inv[0, 0, 0] == pytest.approx(-0.25, abs=1e-14)
    assert fd_derivatives(model, x).d_gamma_inv[0, 0, 0] == pytest.approx(-0.25, abs=1e-8)
    np.testing.assert_allclose(scalar_drift(model, noise, 1.0, x), [-1.0 / 12.0], atol=1e-12)
    np.testing.assert_allclose(inertial_drift(model, noise, 1.0, x), [-1.0 / 12.0], atol=1e-12)

    provider = DriftProvider(model, noise, 1.0)
    stepped = limit_step(np.zeros((1, 1)), provider, 1e-3, np.zeros((1, 1)))
    assert stepped[0, 0] == pytest.approx(-1e-3 / 12.0, abs=1e-15)
    assert stepped[0, 0] == pytest.approx(-8.333e-5, abs=1e-8)


@pytest.mark.parametrize(
    "profile",
    [RadialProfile("linear"), RadialProfile("gaussian", length=1.5)],
    ids=lambda p: p.kind,
)
@pytest.mark.parametrize("alpha", [0.2, 1.0, math.inf])
def test_vortex_drift_points_outward(profile, alpha):
    vortex = VortexModel(profile)
    points = lattice_points(15, 2.5)
    radial = np.sum(turbulence_drift(vortex, alpha, points) * points, axis=-1)
    away = np.linalg.norm(points, axis=-1) > 0.0
    assert np.all(radial[away] > 0.0)
    assert radial[~away] == pytest.approx(0.0, abs=1e-15)


def test_vortex_cutoff_switches_the_drift_off():
    vortex = VortexModel(RadialProfile("linear", cutoff_radius=1.0))
    inside = np.array([[0.5, 0.0], [0.0, -0.9]])
    outside = np.array([[1.5, 0.2], [-2.0, 1.0]])
    assert np.all(np.sum(turbulence_drift(vortex, 1.0, inside) * inside, axis=-1) > 0.0)
    np.testing.assert_array_equal(turbulence_drift(vortex, 1.0, outside), 0.0)


def test_pipe_drift_points_away_from_the_centre():
    pipe = PipeModel()
    drift = turbulence_drift(pipe, 1.0, np.array([0.0, 0.5]))
    assert drift[0] == 0.0
    assert drift[1] == pytest.approx(0.17778, abs=1e-5)
    mirrored = turbulence_drift(pipe, 1.0, np.array([0.0, -0.5]))
    assert mirrored[1] == pytest.approx(-drift[1], abs=1e-14)
    np.testing.assert_array_equal(turbulence_drift(pipe, 0.0, np.array([0.0, 0.5])), 0.0)


@pytest.mark.parametrize(
    "turbulence",
    [VortexModel(), CellularModel(1.0, 2.0, lam=0.7), PipeModel(), TranslationalModel(((1.0, 1.0),))],
    ids=lambda t: t.name,
)
@pytest.mark.parametrize("alpha", [0.5, 2.0, math.inf])
def test_turbulence_drift_is_the_inertial_excess(turbulence, alpha):
    model = as_coefficient_model(turbulence)
    noise = turbulence.noise_spec()
    x = lattice_points(7, 1.8) + 0.05
    excess = inertial_drift(model, noise, alpha, x) - inertial_drift(model, noise, 0.0, x)
    np.testing.assert_allclose(turbulence_drift(turbulence, alpha, x), excess, atol=1e-10)


def test_general_view_uses_finite_differences_consistently():
    turbulence = CellularModel(1.0, 1.0)
    noise = turbulence.noise_spec()
    x = lattice_points(5, 1.2) + 0.1
    scalar = inertial_drift(as_coefficient_model(turbulence), noise, 1.0, x)
    general = inertial_drift(as_coefficient_model(turbulence, "general"), noise, 1.0, x)
    np.testing.assert_allclose(general, scalar, atol=1e-6)


def test_cellular_level_set_identities():
    model = CellularModel(2.0, 3.0, lam=1.5)
    x = lattice_points(13, 2.0)
    diag = cellular_diagnostics(model, 1.0, x)
    np.testing.assert_allclose(diag.grad_psi_dot_xi, 0.0, atol=1e-12)
    np.testing.assert_allclose(diag.grad_psi_dot_Dxixi, 36.0 * diag.psi * diag.bracket, atol=1e-10)
    assert np.all(diag.psi_rate * diag.psi <= 0.0)


@pytest.mark.parametrize("point, expected", [((0.0, math.pi / 2), -0.5), ((math.pi / 2, 0.0), 0.5), ((0.0, 0.0), 0.0)])
def test_cellular_divergence_examples(point, expected):
    model = CellularModel(1.0, 1.0, lam=1.0)
    x = np.array(point)
    assert cellular_diagnostics(model, 1.0, x).div_minus_b == pytest.approx(expected, abs=1e-12)
    assert drift_divergence(model, 1.0, x) == pytest.approx(expected, abs=1e-6)


def test_turbophoretic_alignment_in_the_pipe():
    values = turbophoretic_alignment(PipeModel(), np.array([[0.0, 0.4], [0.0, -0.7], [0.0, 0.0]]))
    np.testing.assert_allclose(values, [1.0, 1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize(
    "text, expected", [("inf", math.inf), ("Infinity", math.inf), ("∞", math.inf), ("0", 0.0), (2, 2.0), (" 0.5 ", 0.5)]
)
def test_parse_alpha(text, expected):
    assert parse_alpha(text) == expected


@pytest.mark.parametrize("text", ["-1", "abc", "nan", -0.5])
def test_parse_alpha_rejects(text):
    with pytest.raises(ConfigError):
        parse_alpha(text)


def test_format_alpha():
    assert format_alpha(math.inf) == "inf"
    assert format_alpha(0.5) == 0.5


def test_mixing_rate():
    bundle = create_model("scalar")
    rate = MixingRate.compute(bundle.model, bundle.noise, 1.0)
    assert rate.omega_alpha == pytest.approx(1.0)
    assert rate.burn_in(8.0) == pytest.approx(8.0)
    assert MixingRate.compute(bundle.model, bundle.noise, 4.0).omega_alpha == pytest.approx(0.5)


def test_drift_provider():
    bundle = create_model("scalar-sine")
    provider = DriftProvider(bundle.model, bundle.noise, 1.0)
    assert provider.method == "scalar"
    x = np.linspace(-2.0, 2.0, 9)[:, None]
    np.testing.assert_allclose(provider.inertial(x), inertial_drift(bundle.model, bundle.noise, 1.0, x), atol=1e-12)
    np.testing.assert_allclose(provider.diffusion(x)[:, 0, 0], 1.0 / bundle.model.friction(x))

    cached = DriftProvider(bundle.model, bundle.noise, 1.0, resolution=0.1)
    values = cached.inertial(np.array([[0.52], [0.48], [1.01]]))
    centres = scalar_drift(bundle.model, bundle.noise, 1.0, np.array([[0.5], [0.5], [1.0]]))
    np.testing.assert_allclose(values, centres, atol=1e-14)
    assert len(cached._cache) == 2

    with pytest.raises(ConfigError):
        DriftProvider(bundle.model, bundle.noise, 1.0, method="spectral")
    with pytest.raises(ConfigError):
        DriftProvider(bundle.model, bundle.noise, 1.0, resolution=0.0)
