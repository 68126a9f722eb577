import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from src.common.errors import ConfigError, ToleranceError
from src.drift import DriftProvider, assemble_Q_alpha, compute_M
from src.models import CellularModel, FunctionalModel, NoiseSpec, create_model
from src.sde import (
    BrownianStream,
    CoupledSimulator,
    InertialState,
    LimitSpec,
    OUTransition,
    SimConfig,
    StreamBatch,
    inertial_step,
    limit_step,
    ou_step,
    run_coupled,
    simulate_frozen_fast,
    transport_split_step,
)
from src.sde.brownian import refine_increments
from src.sde.frozen import exact_transition, frozen_generator
from src.sde.integrators import relax_velocity
from src.sde.ou import psd_sqrt


def test_ou_step_covariance_scalar():
    noise = NoiseSpec(1.0, 1.0)
    transition = OUTransition(noise, 0.1, 0.01)
    assert transition.decay[0, 0] == pytest.approx(math.exp(-0.1), rel=1e-14)
    expected = 0.5 * (1.0 - math.exp(-0.2)) / 0.1
    assert transition.covariance[0, 0] == pytest.approx(expected, rel=1e-12)


def test_ou_conditional_split_recovers_the_step_covariance():
    noise = NoiseSpec([[1.0, 0.5], [0.0, 2.0]], [[1.0, 0.0, 0.3], [0.2, 1.0, 0.0]])
    t = OUTransition(noise, 0.05, 0.01)
    rebuilt = t.conditional_factor @ t.conditional_factor.T + t.gain @ t.gain.T * t.dt
    np.testing.assert_allclose(rebuilt, t.covariance, atol=1e-12)


@pytest.mark.parametrize(
    "A, B",
    [([[1.0]], [[1.0]]), ([[1.0, 0.5], [0.0, 2.0]], [[1.0, 0.0], [0.4, 0.8]])],
)
def test_ou_stationary_covariance_is_M(A, B):
    noise = NoiseSpec(A, B)
    eps, dt, paths = 0.1, 0.01, 20000
    rng = np.random.default_rng(2024)
    z = np.zeros((paths, noise.n))
    for _ in range(300):
        z = ou_step(z, noise, eps, dt, rng.standard_normal((paths, noise.n)))

    M = compute_M(noise)
    empirical = np.cov(math.sqrt(eps) * z, rowvar=False).reshape(noise.n, noise.n)
    stderr = np.sqrt((np.outer(np.diag(M), np.diag(M)) + M**2) / paths)
    assert np.all(np.abs(empirical - M) <= 4.0 * stderr)


def test_ou_without_forcing_decays_deterministically():
    A = np.array([[1.0, 0.5], [0.0, 2.0]])
    noise = NoiseSpec(A, np.zeros((2, 1)))
    rng = np.random.default_rng(4)
    z = rng.normal(size=(5, 2))
    stepped = ou_step(z, noise, 0.1, 0.03, rng.standard_normal((5, 2)))
    np.testing.assert_allclose(stepped, z @ scipy.linalg.expm(-A * 0.03 / 0.1).T, rtol=1e-12, atol=1e-14)


def test_ou_long_step_reaches_the_stationary_law():
    noise = NoiseSpec([[1.0, 0.5], [0.0, 2.0]], [[1.0, 0.0], [0.4, 0.8]])
    eps = 0.1
    transition = OUTransition(noise, eps, 50.0 * eps / noise.spectral_gap)
    np.testing.assert_allclose(transition.covariance, compute_M(noise) / eps, atol=1e-8)
    np.testing.assert_allclose(transition.decay, 0.0, atol=1e-15)


def test_psd_sqrt():
    S = np.array([[4.0, 2.0], [2.0, 3.0]])
    root = psd_sqrt(S, -1e-12)
    np.testing.assert_allclose(root @ root, S, atol=1e-12)
    with pytest.raises(ToleranceError):
        psd_sqrt(-np.eye(2), -1e-12)


def test_streams_are_reproducible_and_distinct():
    a = BrownianStream(7, 3, m=2, dt=0.01, extra=1).block(8)
    b = BrownianStream(7, 3, m=2, dt=0.01, extra=1).block(8)
    c = BrownianStream(7, 4, m=2, dt=0.01, extra=1).block(8)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_refined_stream_shares_the_brownian_path():
    coarse = BrownianStream(7, 3, m=2, dt=0.01, extra=1, refine=0)
    fine = BrownianStream(7, 3, m=2, dt=0.005, extra=1, refine=1)
    dW_coarse, _ = coarse.split(coarse.block(16))
    dW_fine, innovation = fine.split(fine.block(16))
    assert dW_fine.shape == (16, 2, 2)
    assert innovation.shape == (16, 2, 1)
    np.testing.assert_allclose(dW_fine.sum(axis=1), dW_coarse[:, 0], atol=1e-15)


def test_bridge_pieces_have_independent_increments():
    rng = np.random.default_rng(5)
    samples, h = 100000, 0.04
    dW = math.sqrt(h) * rng.standard_normal((samples, 1))
    pieces = refine_increments(dW, rng.standard_normal((samples, 3, 1)), h, 2)[..., 0]
    np.testing.assert_allclose(pieces.sum(axis=1), dW[:, 0], atol=1e-15)
    np.testing.assert_allclose(pieces.var(axis=0), h / 4, rtol=0.03)
    corr = np.corrcoef(pieces, rowvar=False)
    assert np.max(np.abs(corr - np.eye(4))) < 0.02


def test_stream_batch_does_not_depend_on_grouping():
    group = StreamBatch(BrownianStream(11, i, m=1, dt=0.01, extra=1) for i in range(3))
    alone = StreamBatch([BrownianStream(11, 1, m=1, dt=0.01, extra=1)])
    for _ in range(1500):
        dW_group, z_group = group.next()
        dW_alone, z_alone = alone.next()
        np.testing.assert_array_equal(dW_group[1], dW_alone[0])
        np.testing.assert_array_equal(z_group[1], z_alone[0])


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_frozen_transition_matches_stationary_covariance(alpha):
    bundle = create_model("constant", {"gamma": [[2.0, 0.3], [-0.3, 1.0]], "sigma": [[1.0, 0.0], [0.5, 1.0]]},
                          noise={"A": [[1.0, 0.2], [0.0, 1.5]], "B": [[1.0, 0.0], [0.3, 0.7]]})
    model, noise = bundle.model, bundle.noise
    G = frozen_generator(model, noise, alpha, np.zeros(2))
    S = np.zeros((4, 2))
    S[2:] = noise.B
    phi, covariance = exact_transition(G, S @ S.T, 0.7)
    Q = assemble_Q_alpha(model, noise, alpha, np.zeros(2))
    np.testing.assert_allclose(covariance, Q - phi @ Q @ phi.T, atol=1e-11)


def test_frozen_simulation_shapes_and_errors():
    bundle = create_model("scalar")
    first = simulate_frozen_fast([0.0], bundle.model, bundle.noise, 1.0, T=0.5, dt=0.01, seed=3, replicas=4)
    second = simulate_frozen_fast([0.0], bundle.model, bundle.noise, 1.0, T=0.5, dt=0.01, seed=3, replicas=2,
                                  first_index=2)
    assert first.u.shape == (4, 51, 1)
    np.testing.assert_allclose(first.times[-1], 0.5)
    np.testing.assert_array_equal(first.z[2:], second.z)
    with pytest.raises(ConfigError):
        simulate_frozen_fast([0.0], bundle.model, bundle.noise, 0.0, T=0.5, dt=0.01, seed=3)
    with pytest.raises(ConfigError):
        simulate_frozen_fast([0.0], bundle.model, bundle.noise, 1.0, T=0.001, dt=0.01, seed=3)


def test_velocity_relaxation():
    model = FunctionalModel(np.zeros(2), np.diag([2.0, 0.5]), np.zeros((2, 1)), 2, 1, 0.5, 2.0)
    x = np.zeros((3, 2))
    v = np.ones((3, 2))
    force = np.array([[1.0, 1.0]] * 3)
    relaxed = relax_velocity(model, x, v, force, mu=0.1, dt=0.05)
    rates = np.array([2.0, 0.5])
    decay = np.exp(-rates * 0.05 / 0.1)
    np.testing.assert_allclose(relaxed, decay * v + (1 - decay) * force / rates, atol=1e-13)

    state = InertialState(x, v, np.zeros((3, 1)))
    noise = NoiseSpec(1.0, 1.0)
    nxt = inertial_step(state, model, noise, 0.1, 0.1, 0.05, np.zeros((3, 1)))
    np.testing.assert_allclose(nxt.v, decay * v, atol=1e-13)
    np.testing.assert_allclose(nxt.x, 0.5 * 0.05 * (v + nxt.v), atol=1e-15)


def test_inertial_step_is_stable_for_tiny_mass():
    bundle = create_model("scalar-sine")
    model, noise = bundle.model, bundle.noise
    mu, eps, dt = 1e-8, 0.05, 1e-3
    transition = OUTransition(noise, eps, dt)
    rng = np.random.default_rng(12)
    state = InertialState(np.full((10, 1), 0.3), np.full((10, 1), 5.0), np.zeros((10, 1)))
    for _ in range(2000):
        force = model.b(state.x) + np.einsum("...ik,...k->...i", model.sigma(state.x), state.z)
        target = force / model.friction(state.x)[:, None]
        state = inertial_step(state, model, noise, mu, eps, dt, rng.standard_normal((10, 1)), transition=transition)
        # the velocity sits on gamma^-1 (b + sigma z) of the previous step
        np.testing.assert_allclose(state.v, target, rtol=1e-12, atol=1e-12)
    assert state.is_finite().all()


def test_limit_step_for_constant_coefficients():
    bundle = create_model("scalar")
    provider = DriftProvider(bundle.model, bundle.noise, 1.0)
    dW = np.array([[0.1], [-0.2]])
    np.testing.assert_allclose(limit_step(np.zeros((2, 1)), provider, 0.01, dW), 0.5 * dW, atol=1e-15)


def test_transport_keeps_cellular_particles_on_level_sets():
    model = CellularModel(1.0, 2.0)
    rng = np.random.default_rng(9)
    x = rng.uniform(-2.0, 2.0, size=(50, 2))
    dW = 1e-3 * rng.standard_normal((50, 1))
    moved = transport_split_step(x, model, 0.0, 1e-3, dW)
    np.testing.assert_allclose(model.psi(moved), model.psi(x), atol=1e-10)
    assert np.max(np.abs(moved - x)) > 1e-4


@pytest.mark.parametrize(
    "rule, expected",
    [("alpha", 0.2), ("square", 0.01), ("sqrt", math.sqrt(0.1)), ("power:1.5", 0.1**1.5)],
)
def test_mass_rules(rule, expected):
    assert SimConfig(epsilon=0.1, alpha=2.0, mu_rule=rule).resolve_mu() == pytest.approx(expected)


@pytest.mark.parametrize(
    "changes, key",
    [
        ({"dt": 0.0}, "dt"),
        ({"T": 1e-4}, "T"),
        ({"epsilon": -1.0}, "eps"),
        ({"stride": 0}, "stride"),
        ({"mu_rule": "fixed"}, "mu"),
        ({"mu_rule": "power:x"}, "mu_rule"),
        ({"mu_rule": "heavy"}, "mu_rule"),
        ({"alpha": math.inf}, "mu_rule"),
        ({"x0": (0.0, 0.0)}, "x0"),
    ],
)
def test_sim_config_validation(changes, key):
    config = replace(SimConfig(), **changes)
    with pytest.raises(ConfigError) as info:
        config.validate(1)
    assert info.value.key_path == key


def test_step_count_rounds_to_whole_limit_steps():
    config = SimConfig(T=1.0, dt=0.003, stride=4)
    assert config.n_steps == 336
    assert SimConfig(T=1.0, dt=0.01, refine=2).n_steps == 100


def test_limit_only_runs_need_no_mass():
    config = SimConfig(alpha=math.inf, x0=(0.0,))
    bundle = create_model("scalar-sine")
    simulator = CoupledSimulator(config, bundle.model, bundle.noise, prelimit=False)
    assert simulator.mu is None
    batch = simulator.run([0, 1])
    assert batch.prelimit is None
    assert batch.limits["alpha=inf"].shape == (2, 2, 1)


def test_coupled_runs_are_reproducible_per_index():
    bundle = create_model("scalar-sine")
    config = SimConfig(T=0.3, dt=0.005, epsilon=0.05, stride=2, x0=(0.2,))
    simulator = CoupledSimulator(config, bundle.model, bundle.noise)
    group = simulator.run([0, 1, 2, 3])
    single = simulator.run([2])
    np.testing.assert_array_equal(group.prelimit[2], single.prelimit[0])
    np.testing.assert_array_equal(group.limits["alpha=1.0"][2], single.limits["alpha=1.0"][0])
    assert not group.flagged.any()
    assert group.sup_distance["alpha=1.0"].shape == (4,)


def test_halved_step_control_sees_the_same_limit_path():
    bundle = create_model("scalar-sine")
    base = SimConfig(T=0.5, dt=0.01, epsilon=0.1, stride=1, x0=(0.0,))
    half = replace(base, dt=0.005, stride=2, refine=1)
    a = CoupledSimulator(base, bundle.model, bundle.noise).run(range(5))
    b = CoupledSimulator(half, bundle.model, bundle.noise).run(range(5))
    np.testing.assert_allclose(a.times, b.times)
    np.testing.assert_allclose(a.limits["alpha=1.0"], b.limits["alpha=1.0"], atol=1e-12)


def test_distance_shrinks_with_eps():
    bundle = create_model("scalar")
    sup = []
    for eps, dt, stride in ((0.1, 1e-3, 1), (0.005, 2.5e-4, 4)):
        config = SimConfig(T=1.0, dt=dt, epsilon=eps, stride=stride, x0=(0.0,))
        batch = CoupledSimulator(config, bundle.model, bundle.noise).run(range(20))
        sup.append(batch.sup_distance["alpha=1.0"])
    assert np.mean(sup[1]) < 0.5 * np.mean(sup[0])
    assert np.mean(sup[1] < sup[0]) >= 0.8


def test_coupled_run_without_noise_stays_put():
    bundle = create_model("scalar", noise={"A": [[1.0]], "B": [[0.0]]})
    config = SimConfig(T=0.2, dt=0.005, epsilon=0.05, stride=2, x0=(0.3,), v0=(0.0,))
    run = run_coupled(config, bundle.model, bundle.noise)
    np.testing.assert_array_equal(run.prelimit.x, 0.3)
    np.testing.assert_array_equal(run.limit.x, 0.3)
    assert run.sup_distance == 0.0


def test_run_coupled_records_every_limit_step():
    bundle = create_model("scalar-sine")
    run = run_coupled(SimConfig(T=0.1, dt=0.005, epsilon=0.05, stride=2, x0=(0.0,)), bundle.model, bundle.noise)
    assert run.prelimit.x.shape == (11, 1)
    assert run.limit.x.shape == (11, 1)
    assert run.prelimit.v.shape == (11, 1)
    np.testing.assert_allclose(run.prelimit.times, np.linspace(0.0, 0.1, 11))
    assert run.sup_distance >= 0.0
    assert LimitSpec(2.0).name == "alpha=2.0"
