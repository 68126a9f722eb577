import math

import numpy as np
import pytest

from src.common.errors import ConfigError
from src.harness import (
    EnsembleSpec,
    ExperimentReport,
    cellular_experiment,
    chunk_indices,
    config_hash,
    convergence_experiment,
    covariance_experiment,
    divergence_experiment,
    divergence_map,
    parallel_map,
    regime_separation_experiment,
    run_ensemble,
    standard_error,
    step_grid,
    turbophoresis_experiment,
    vortex_experiment,
)
from src.harness.convergence import fractions_nonincreasing
from src.harness.covariance import z_score
from src.harness.report import summarize
from src.models import create_model
from src.sde import CoupledSimulator, SimConfig


def test_step_grid():
    assert step_grid(0.1) == (pytest.approx(1e-3), 1)
    dt, stride = step_grid(0.005)
    assert stride == 4 and dt == pytest.approx(2.5e-4)
    dt, stride = step_grid(0.003)
    assert stride == 7 and dt * stride == pytest.approx(1e-3)
    assert step_grid(0.1, {"dt_limit": 0.01}) == (pytest.approx(0.005), 2)


def test_chunk_indices():
    chunks = chunk_indices(7, 3)
    assert [c.tolist() for c in chunks] == [[0, 1, 2], [3, 4, 5], [6]]
    assert chunk_indices(2, 5, first_index=10)[0].tolist() == [10, 11]
    with pytest.raises(ConfigError):
        chunk_indices(4, 0)


def test_parallel_map_keeps_order():
    assert parallel_map(abs, [-3, 2, -1], workers=1) == [3, 2, 1]
    assert parallel_map(abs, [-3, 2, -1], workers=2) == [3, 2, 1]


def test_ensemble_is_independent_of_workers_and_chunking():
    bundle = create_model("scalar-sine")
    config = SimConfig(T=0.2, dt=0.002, epsilon=0.02, stride=2, x0=(0.3,))
    simulator = CoupledSimulator(config, bundle.model, bundle.noise)
    serial = run_ensemble(simulator, 9, workers=1, chunk_size=4)
    parallel = run_ensemble(simulator, 9, workers=2, chunk_size=4)
    regrouped = run_ensemble(simulator, 9, workers=1, chunk_size=9)
    for other in (parallel, regrouped):
        np.testing.assert_array_equal(serial.indices, other.indices)
        np.testing.assert_array_equal(serial.prelimit, other.prelimit)
        np.testing.assert_array_equal(serial.limits["alpha=1.0"], other.limits["alpha=1.0"])


@pytest.mark.parametrize(
    "spec, key",
    [
        (EnsembleSpec(1, SimConfig()), "n_paths"),
        (EnsembleSpec(5, SimConfig(), [0.1, -0.1]), "sweep"),
        (EnsembleSpec(5, SimConfig(), [0.1, 0.2, 0.05]), "sweep"),
        (EnsembleSpec(5, SimConfig(), burn_in=-1.0), "burn_in"),
    ],
)
def test_ensemble_spec_validation(spec, key):
    with pytest.raises(ConfigError) as info:
        spec.validate()
    assert info.value.key_path == key


def test_statistics_helpers():
    assert standard_error([1.0]) == 0.0
    assert standard_error([1.0, 3.0]) == pytest.approx(1.0)
    mean, se, n = summarize([1.0, 2.0, 100.0], keep=[True, True, False])
    assert (mean, n) == (1.5, 2)
    assert se == pytest.approx(0.5)
    mean, se, n = summarize([1.0], keep=[False])
    assert math.isnan(mean) and n == 0
    assert z_score(1.2, 1.0, 0.1) == pytest.approx(2.0)
    assert z_score(1.0, 1.0, 0.0) == 0.0
    assert z_score(1.1, 1.0, 0.0) == math.inf


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1.0, "inf"]}) == config_hash({"b": [1.0, "inf"], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_report_verdicts():
    report = ExperimentReport("test", {"seed": 1})
    report.add_row(0.1, math.inf, 0.0, 3)
    report.checks["first"] = True
    assert report.verdict == "pass"
    report.checks["second"] = False
    assert report.verdict == "fail"
    report.note_flagged(np.array([True] + [False] * 9))
    assert report.verdict == "invalid" and not report.valid
    data = report.to_dict()
    assert data["rows"][0]["estimate"] == "inf"
    assert data["config_hash"] == config_hash({"seed": 1})


def test_convergence_experiment_structure():
    bundle = create_model("scalar")
    report = convergence_experiment(bundle.model, bundle.noise, 1.0, [0.1, 0.02], n_paths=6, T=0.2, seed=3)
    assert [row.param for row in report.rows] == [0.1, 0.02, "control:dt/2"]
    assert report.rows[1].verdict in ("decrease", "inconclusive")
    assert set(report.checks) == {
        "sup_distance_decreasing", "exceed_fraction_nonincreasing", "exceed_fraction_final", "effect_exceeds_control"
    }
    assert len(report.records) == 12
    assert set(report.records[0]) == set(report.columns)
    with pytest.raises(ConfigError):
        convergence_experiment(bundle.model, bundle.noise, 1.0, [0.02, 0.1], n_paths=6, T=0.2)


def test_exceed_fractions_allow_sampling_noise():
    # one extra path out of 200 is within the joint standard error
    p, q = 0.05, 0.055
    se_p, se_q = math.sqrt(p * (1 - p) / 200), math.sqrt(q * (1 - q) / 200)
    assert fractions_nonincreasing([0.3, p, q], [0.03, se_p, se_q])
    assert not fractions_nonincreasing([0.05, 0.3], [se_p, 0.03])
    assert fractions_nonincreasing([1.0, 1.0], [0.0, 0.0])
    assert not fractions_nonincreasing([0.0, 0.01], [0.0, 0.0])
    assert not fractions_nonincreasing([0.2, math.nan], [0.02, math.nan])


def test_convergence_fails_when_every_path_exceeds_the_threshold():
    bundle = create_model("scalar-sine")
    report = convergence_experiment(
        bundle.model, bundle.noise, 1.0, [0.1, 0.05], n_paths=6, T=0.1, eta=0.0, control=False, seed=5
    )
    assert [row.extra["exceed_fraction"] for row in report.rows] == [1.0, 1.0]
    assert report.checks["exceed_fraction_nonincreasing"]
    assert not report.checks["exceed_fraction_final"]
    assert report.verdict == "fail"

    relaxed = convergence_experiment(
        bundle.model, bundle.noise, 1.0, [0.1, 0.05], n_paths=6, T=0.1, eta=10.0, control=False, seed=5
    )
    assert relaxed.checks["exceed_fraction_final"]
    assert relaxed.checks["exceed_fraction_nonincreasing"]


def test_covariance_experiment_structure():
    bundle = create_model("scalar")
    report = covariance_experiment(bundle.model, bundle.noise, 1.0, [0.0], T=12.0, dt=0.05, n_reps=4, seed=1)
    names = [row.param for row in report.rows]
    assert names == ["N_1_1", "L_1_1", "M_1_1", "control:dt/2"]
    assert report.rows[1].extra["target"] == pytest.approx(1.0 / 6.0)
    assert report.columns == ["replica", "N_1_1", "L_1_1", "M_1_1"]
    assert len(report.records) == 4
    with pytest.raises(ConfigError):
        covariance_experiment(bundle.model, bundle.noise, 0.0, [0.0], T=12.0, dt=0.05, n_reps=4)
    with pytest.raises(ConfigError):
        covariance_experiment(bundle.model, bundle.noise, 1.0, [0.0], T=5.0, dt=0.05, n_reps=4, burn_in=6.0)


def test_regime_experiment_structure():
    bundle = create_model("scalar-sine-xi")
    report = regime_separation_experiment(bundle.model, bundle.noise, 0.05, n_paths=4, T=0.1, seed=2)
    params = [row.param for row in report.rows]
    assert "mu=square|separation" in params and "mu=sqrt|separation" in params
    assert {"square_follows_alpha0", "sqrt_follows_alphainf", "terminal_gap", "effect_exceeds_control"} <= set(
        report.checks
    )
    assert len(report.records) == 16


def test_divergence_map_examples():
    field = divergence_map(1.0, 1.0, 1.0, 1.0, grid=np.array([[0.0, math.pi / 2], [math.pi / 2, 0.0]]))
    np.testing.assert_allclose(field.closed_form, [-0.5, 0.5], atol=1e-12)
    assert field.max_error <= 1e-6


def test_divergence_experiment_passes():
    report = divergence_experiment(2.0, 1.0, 0.5, 3.0, grid=21)
    assert report.passed
    assert len(report.records) == 21 * 21
    assert report.columns == ["x1", "x2", "closed_form", "numerical"]


def test_vortex_experiment_structure():
    report = vortex_experiment([0.0, 1.0], n_paths=6, T=0.05, dt=0.01, checkpoints=3, seed=4)
    limits = {row.extra.get("limit") for row in report.rows}
    assert {"alpha=0.0", "alpha=1.0", "control"} <= limits
    assert report.checks["closed_form_drift"]
    assert "alpha0_flat" in report.checks


def test_cellular_experiment_structure():
    report = cellular_experiment(1.0, 1.0, 1.0, 1.0, n_paths=4, T=0.05, delta=0.2, dt=0.01, checkpoints=3, seed=4)
    assert report.checks["level_set_identities"]
    assert report.checks["psi_monotone"]
    assert set(report.records[0]) == set(report.columns)


def test_turbophoresis_drift_sign():
    for alpha in (0.0, 1.0):
        report = turbophoresis_experiment(alpha, n_paths=4, T=0.02, dt=0.01, grid_points=21, seed=4)
        assert report.checks["drift_sign"]
        assert ("flat_against_control" in report.checks) == (alpha == 0.0)


@pytest.mark.slow
def test_scalar_convergence_acceptance():
    bundle = create_model("scalar-sine")
    report = convergence_experiment(bundle.model, bundle.noise, 1.0, [0.1, 0.05, 0.02, 0.01], n_paths=200, T=1.0)
    assert report.checks["sup_distance_decreasing"]
    assert report.checks["exceed_fraction_nonincreasing"]
    assert report.checks["exceed_fraction_final"]
    assert report.rows[3].extra["exceed_fraction"] < 0.1
    assert report.checks["effect_exceeds_control"]
    assert report.valid


@pytest.mark.slow
def test_scalar_covariance_acceptance():
    bundle = create_model("scalar")
    report = covariance_experiment(bundle.model, bundle.noise, 1.0, [0.0], T=100.0, dt=0.01, n_reps=40)
    assert report.checks["entries_within_3se"]
    assert report.checks["control_agrees"]


@pytest.mark.slow
def test_vortex_spreading_acceptance():
    report = vortex_experiment([0.0, 0.5, 1.0], n_paths=400, T=1.0)
    assert report.checks["increasing_in_t"]
    assert report.checks["increasing_in_alpha"]
    assert report.checks["alpha0_flat"]


@pytest.mark.slow
def test_turbophoresis_acceptance():
    report = turbophoresis_experiment(1.0, n_paths=400, T=2.0)
    assert report.checks["mean_abs_x2_increases"]
    assert report.checks["exceeds_control"]
