"""Particle-transport phenomena in the synthetic turbulence models.

All experiments here integrate the limit equation only. Drift-free controls
use the Stratonovich splitting scheme at alpha = 0 on the same Brownian
increments, so effects are measured as paired per-path differences.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from ..common.config import EXPERIMENT_DEFAULTS, SIM_DEFAULTS
from ..drift.matrices import format_alpha, parse_alpha
from ..drift.turbulence import cellular_diagnostics, drift_divergence, drift_prefactor, turbulence_drift
from ..models.turbulence import CellularModel, PipeModel, VortexModel, as_coefficient_model, lattice_points
from ..sde.coupled import CoupledSimulator, LimitSpec, PathBatch, SimConfig
from .ensemble import run_ensemble
from .report import ExperimentReport, summarize

logger = logging.getLogger(__name__)

CONTROL = LimitSpec(0.0, "split", label="control")


def _record_every(config: SimConfig, checkpoints: int) -> int:
    coarse = config.n_steps // config.stride
    return max(1, coarse // max(1, checkpoints - 1))


def _simulate(turbulence, config, limits, sampler, record_every, n_paths, workers, chunk_size) -> PathBatch:
    simulator = CoupledSimulator(
        config,
        as_coefficient_model(turbulence),
        turbulence.noise_spec(),
        limits=limits,
        prelimit=False,
        turbulence=turbulence,
        initial_sampler=sampler,
        record_every=record_every,
    )
    return run_ensemble(simulator, n_paths, workers, chunk_size)


def _halving_floor(
    turbulence, config, spec, sampler, n_paths, statistic: Callable[[np.ndarray], np.ndarray],
    batch: PathBatch, workers, chunk_size,
):
    """Mean paired change of a terminal statistic when dt is halved on the same Brownian path."""
    halved = replace(config, dt=config.dt / 2.0, refine=config.refine + 1)
    control = _simulate(turbulence, halved, [spec], sampler, None, n_paths, workers, chunk_size)
    keep = ~(batch.flagged | control.flagged)
    change = np.abs(statistic(batch.limits[spec.name][:, -1]) - statistic(control.limits[spec.name][:, -1]))
    return summarize(change, keep) + (control.flagged,)


def _increasing(samples: np.ndarray, keep: np.ndarray, sigmas: float) -> bool:
    """Every paired increment between successive records exceeds ``sigmas`` standard errors."""
    for k in range(samples.shape[1] - 1):
        mean, se, _ = summarize(samples[:, k + 1] - samples[:, k], keep)
        if not mean > sigmas * se:
            return False
    return True


def _flat(delta: np.ndarray, keep: np.ndarray, dt: float, scale: float) -> bool:
    mean, se, _ = summarize(delta, keep)
    return abs(mean) <= EXPERIMENT_DEFAULTS["flat_sigmas"] * se + 10.0 * dt * (1.0 + abs(scale))


def unit_circle_sample(generator: np.random.Generator) -> np.ndarray:
    theta = generator.uniform(0.0, 2.0 * math.pi)
    return np.array([math.cos(theta), math.sin(theta)])


def vortex_experiment(
    alpha_list: Sequence,
    n_paths: int,
    T: float,
    dt: Optional[float] = None,
    turbulence: Optional[VortexModel] = None,
    seed: int = 42,
    checkpoints: Optional[int] = None,
    control: bool = True,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Centrifugal spreading of a particle cloud started on the unit circle.

    Rows hold E|x(t)|^2 per limit and record time. Checks:
    ``increasing_in_t`` for every alpha > 0, ``increasing_in_alpha`` at T,
    ``alpha0_flat`` against the drift-free control when alpha = 0 is swept,
    and ``closed_form_drift``: the drift equals (alpha / (lambda + alpha))
    2 f'^2 x pointwise.
    """
    sigmas = EXPERIMENT_DEFAULTS["verdict_sigmas"]
    turbulence = turbulence or VortexModel()
    alphas = sorted({parse_alpha(a) for a in alpha_list})
    dt = SIM_DEFAULTS["dt"] if dt is None else dt
    checkpoints = checkpoints or EXPERIMENT_DEFAULTS["checkpoints"]
    limits = [LimitSpec(a) for a in alphas] + [CONTROL]
    config = SimConfig(T=T, dt=dt, alpha=alphas[-1], x0=(0.0, 0.0), seed=seed)

    report = ExperimentReport("demo vortex", report_config or {
        "experiment": "vortex",
        "model": turbulence.name,
        "profile": turbulence.profile.to_dict(),
        "alpha": [format_alpha(a) for a in alphas],
        "n_paths": n_paths,
        "T": T,
        "dt": dt,
        "seed": seed,
    })
    report.columns = ["limit", "t", "mean_r2", "stderr", "n"]

    batch = _simulate(turbulence, config, limits, unit_circle_sample, _record_every(config, checkpoints),
                      n_paths, workers, chunk_size)
    keep = ~batch.flagged
    flagged = report.note_flagged(batch.flagged)
    r2 = {name: np.sum(path**2, axis=-1) for name, path in batch.limits.items()}

    for spec in limits:
        for k, t in enumerate(batch.times):
            mean, se, n = summarize(r2[spec.name][:, k], keep)
            report.add_row(float(t), mean, se, n, flagged_fraction=flagged, extra={"limit": spec.name})
            report.records.append({"limit": spec.name, "t": float(t), "mean_r2": mean, "stderr": se, "n": n})
        logger.info(f"{spec.name}: E|x(T)|^2 = {report.rows[-1].estimate:.4g} +/- {report.rows[-1].stderr:.2g}")

    spreading = [spec for spec in limits[:-1] if spec.alpha > 0.0]
    report.checks["increasing_in_t"] = all(_increasing(r2[s.name], keep, sigmas) for s in spreading)
    increasing = True
    for low, high in zip(spreading, spreading[1:]):
        mean, se, _ = summarize(r2[high.name][:, -1] - r2[low.name][:, -1], keep)
        increasing &= mean > sigmas * se
    report.checks["increasing_in_alpha"] = bool(increasing)
    if 0.0 in alphas:
        still = LimitSpec(0.0).name
        report.checks["alpha0_flat"] = _flat(
            r2[still][:, -1] - r2[CONTROL.name][:, -1], keep, dt, float(np.mean(r2[CONTROL.name][keep, -1]))
        )

    points = lattice_points(21, 3.0)
    s = np.sum(points**2, axis=-1)
    worst = 0.0
    for alpha in alphas:
        prefactor = drift_prefactor(turbulence.friction(points), alpha)
        expected = (4.0 * prefactor * turbulence.profile.first(s) ** 2)[:, None] * points
        worst = max(worst, float(np.max(np.abs(turbulence_drift(turbulence, alpha, points) - expected))))
    report.notes.append(f"closed-form drift error {worst:.3g}")
    report.checks["closed_form_drift"] = worst <= 1e-9

    if control and spreading:
        spec = spreading[-1]
        floor, floor_se, n, control_flagged = _halving_floor(
            turbulence, config, spec, unit_circle_sample, n_paths,
            lambda x: np.sum(x**2, axis=-1), batch, workers, chunk_size,
        )
        report.note_flagged(control_flagged)
        report.add_row("control:dt/2", floor, floor_se, n, extra={"limit": spec.name, "dt": dt / 2.0})
        effect, _, _ = summarize(r2[spec.name][:, -1] - r2[spec.name][:, 0], keep)
        report.checks["effect_exceeds_control"] = bool(effect > 3.0 * floor)

    return report


def cell_sample(generator: np.random.Generator, k1: float, k2: float) -> np.ndarray:
    """Uniform draw on the cell 0 < x1 < pi/k1, |x2| < pi/(2 k2), where psi > 0."""
    u = generator.uniform(size=2)
    return np.array([math.pi / abs(k1) * u[0], math.pi / abs(k2) * (u[1] - 0.5)])


def cellular_experiment(
    k1: float,
    k2: float,
    lam: float,
    alpha,
    n_paths: int,
    T: float,
    delta: float,
    c0: float = 1.0,
    dt: Optional[float] = None,
    window: float = 0.1,
    seed: int = 42,
    checkpoints: Optional[int] = None,
    control: bool = True,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Concentration of particles on the separatrices of the cellular flow.

    The limit equation is integrated with the splitting scheme, which keeps
    the transport on the level sets of psi, so the drift alone changes psi.

    Checks:
        ``level_set_identities``: grad psi . xi = 0 and grad psi . D xi xi =
        (k1 k2)^2 psi (cos^2(k1 x1) + sin^2(k2 x2)) at lattice points.
        ``psi_monotone``: |psi| never grows by more than 10 dt in one step.
        ``occupancy_nondecreasing`` / ``occupancy_final``: the fraction of
        paths with |psi| <= delta never drops by more than one path between
        checkpoints and ends at 0.95 or above.
        ``rate_matches``: on windows where |psi| > 0.1 the change of psi agrees
        with the integrated decay rate to 5% plus 10 dt.
    """
    alpha = parse_alpha(alpha)
    turbulence = CellularModel(k1, k2, lam, c0)
    dt = SIM_DEFAULTS["dt"] if dt is None else dt
    checkpoints = checkpoints or EXPERIMENT_DEFAULTS["checkpoints"]
    spec = LimitSpec(alpha, "split")
    config = SimConfig(T=T, dt=dt, alpha=alpha, x0=(0.0, 0.0), seed=seed)
    sampler = partial(cell_sample, k1=k1, k2=k2)

    report = ExperimentReport("demo cellular", report_config or {
        "experiment": "cellular",
        "k1": k1,
        "k2": k2,
        "lambda": lam,
        "c0": c0,
        "alpha": format_alpha(alpha),
        "n_paths": n_paths,
        "T": T,
        "dt": dt,
        "delta": delta,
        "seed": seed,
    })
    report.columns = ["trajectory_index", "t", "x1", "x2", "psi", "flagged"]

    points = lattice_points(41, math.pi)
    diagnostics = cellular_diagnostics(turbulence, alpha, points)
    expected = (turbulence.k1 * turbulence.k2) ** 2 * diagnostics.psi * diagnostics.bracket
    report.checks["level_set_identities"] = bool(
        np.max(np.abs(diagnostics.grad_psi_dot_xi)) <= 1e-10
        and np.max(np.abs(diagnostics.grad_psi_dot_Dxixi - expected)) <= 1e-10 * (1.0 + np.max(np.abs(expected)))
    )

    batch = _simulate(turbulence, config, [spec], sampler, 1, n_paths, workers, chunk_size)
    keep = ~batch.flagged
    flagged = report.note_flagged(batch.flagged)
    path = batch.limits[spec.name]
    psi = turbulence.psi(path)
    size = np.abs(psi)
    n = int(keep.sum())

    rises = np.max(np.diff(size, axis=1), axis=1)
    monotone = rises[keep] <= 10.0 * dt
    report.add_row("psi_monotone", float(np.mean(monotone)), 0.0, n, flagged_fraction=flagged,
                   extra={"max_rise": float(np.max(rises[keep])) if n else math.nan})
    report.checks["psi_monotone"] = bool(np.all(monotone))

    index = np.unique(np.linspace(0, len(batch.times) - 1, checkpoints).round().astype(int))
    occupancy = []
    for k in index:
        p = float(np.mean(size[keep, k] <= delta))
        occupancy.append(p)
        report.add_row(float(batch.times[k]), p, math.sqrt(p * (1.0 - p) / n), n,
                       flagged_fraction=flagged, extra={"quantity": "occupancy"})
        for j, trajectory in enumerate(batch.indices):
            report.records.append({
                "trajectory_index": int(trajectory), "t": float(batch.times[k]),
                "x1": float(path[j, k, 0]), "x2": float(path[j, k, 1]),
                "psi": float(psi[j, k]), "flagged": bool(batch.flagged[j]),
            })
    report.checks["occupancy_nondecreasing"] = bool(np.all(np.diff(occupancy) >= -1.0 / n))
    report.checks["occupancy_final"] = occupancy[-1] >= 0.95
    logger.info(f"Occupancy of |psi| <= {delta}: {occupancy[0]:.3f} -> {occupancy[-1]:.3f}")

    rate = cellular_diagnostics(turbulence, alpha, path).psi_rate
    width = max(1, int(round(window / dt)))
    errors, allowed = [], []
    for start in range(0, psi.shape[1] - width, width):
        stop = start + width
        mask = keep & (np.min(size[:, start : stop + 1], axis=1) > 0.1)
        predicted = trapezoid(rate[mask, start : stop + 1], dx=dt, axis=1)
        errors.append(np.abs(psi[mask, stop] - psi[mask, start] - predicted))
        allowed.append(0.05 * np.abs(predicted) + 10.0 * dt)
    errors = np.concatenate(errors) if errors else np.zeros(0)
    allowed = np.concatenate(allowed) if allowed else np.zeros(0)
    report.add_row("rate_match", float(np.max(errors / allowed)) if errors.size else 0.0, 0.0, int(errors.size),
                   extra={"window": width * dt})
    report.checks["rate_matches"] = bool(np.all(errors <= allowed))

    if control:
        floor, floor_se, count, control_flagged = _halving_floor(
            turbulence, config, spec, sampler, n_paths, lambda x: np.abs(turbulence.psi(x)), batch, workers, chunk_size,
        )
        report.note_flagged(control_flagged)
        report.add_row("control:dt/2", floor, floor_se, count, extra={"dt": dt / 2.0})
        effect, _, _ = summarize(size[:, 0] - size[:, -1], keep)
        report.checks["effect_exceeds_control"] = bool(effect > 3.0 * floor)

    return report


def band_sample(generator: np.random.Generator, band: float) -> np.ndarray:
    return np.array([0.0, generator.uniform(-band, band)])


def turbophoresis_experiment(
    alpha,
    n_paths: int,
    T: float,
    dt: Optional[float] = None,
    turbulence: Optional[PipeModel] = None,
    band: float = 0.2,
    grid_points: int = 101,
    grid_extent: float = 1.5,
    seed: int = 42,
    checkpoints: Optional[int] = None,
    control: bool = True,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Migration of particles towards the wall of a turbulent pipe.

    Rows hold E|x2(t)| for the limit at ``alpha`` and for the drift-free
    control. For alpha > 0 the spread must grow by more than three standard
    errors and exceed the control at T by as much; for alpha = 0 it must stay
    within two standard errors of the control. ``drift_sign`` checks on a
    grid that the x2 component of the drift has the sign of x2 wherever
    grad k_T does not vanish.
    """
    sigmas = EXPERIMENT_DEFAULTS["verdict_sigmas"]
    alpha = parse_alpha(alpha)
    turbulence = turbulence or PipeModel()
    dt = SIM_DEFAULTS["dt"] if dt is None else dt
    checkpoints = checkpoints or EXPERIMENT_DEFAULTS["checkpoints"]
    spec = LimitSpec(alpha)
    config = SimConfig(T=T, dt=dt, alpha=alpha, x0=(0.0, 0.0), seed=seed)
    sampler = partial(band_sample, band=band)

    report = ExperimentReport("demo turbophoresis", report_config or {
        "experiment": "turbophoresis",
        "model": turbulence.name,
        "alpha": format_alpha(alpha),
        "n_paths": n_paths,
        "T": T,
        "dt": dt,
        "band": band,
        "seed": seed,
    })
    report.columns = ["limit", "t", "mean_abs_x2", "stderr", "n"]

    axis = np.linspace(-grid_extent, grid_extent, grid_points)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    push = turbulence_drift(turbulence, alpha, grid)[:, 1]
    active = turbulence.turbulent_energy_grad(grid)[:, 1] != 0.0
    if alpha > 0.0:
        report.checks["drift_sign"] = bool(np.all(np.sign(push[active]) == np.sign(grid[active, 1])))
    else:
        report.checks["drift_sign"] = bool(np.all(push == 0.0))

    batch = _simulate(turbulence, config, [spec, CONTROL], sampler, _record_every(config, checkpoints),
                      n_paths, workers, chunk_size)
    keep = ~batch.flagged
    flagged = report.note_flagged(batch.flagged)
    spread = {name: np.abs(path[..., 1]) for name, path in batch.limits.items()}

    for name, values in spread.items():
        for k, t in enumerate(batch.times):
            mean, se, n = summarize(values[:, k], keep)
            report.add_row(float(t), mean, se, n, flagged_fraction=flagged, extra={"limit": name})
            report.records.append({"limit": name, "t": float(t), "mean_abs_x2": mean, "stderr": se, "n": n})

    moving, reference = spread[spec.name], spread[CONTROL.name]
    excess, excess_se, n = summarize(moving[:, -1] - reference[:, -1], keep)
    report.add_row("excess_over_control", excess, excess_se, n, flagged_fraction=flagged)
    logger.info(f"alpha={format_alpha(alpha)}: E|x2(T)| exceeds the control by {excess:.4g} +/- {excess_se:.2g}")
    if alpha > 0.0:
        rise, rise_se, _ = summarize(moving[:, -1] - moving[:, 0], keep)
        report.checks["mean_abs_x2_increases"] = rise > sigmas * rise_se
        report.checks["exceeds_control"] = excess > sigmas * excess_se
    else:
        report.checks["flat_against_control"] = _flat(
            moving[:, -1] - reference[:, -1], keep, dt, float(np.mean(reference[keep, -1]))
        )

    if control and alpha > 0.0:
        floor, floor_se, count, control_flagged = _halving_floor(
            turbulence, config, spec, sampler, n_paths, lambda x: np.abs(x[..., 1]), batch, workers, chunk_size,
        )
        report.note_flagged(control_flagged)
        report.add_row("control:dt/2", floor, floor_se, count, extra={"dt": dt / 2.0})
        report.checks["effect_exceeds_control"] = bool(excess > 3.0 * floor)

    return report


@dataclass(frozen=True, eq=False)
class DivergenceMap:
    """Samples of div(-b_alpha) for the cellular flow.

    Attributes:
        points (np.ndarray): Sample points, shape (..., 2).
        closed_form (np.ndarray): -(alpha / (lambda + alpha)) (k1 k2)^2
            (sin^2(k2 x2) - sin^2(k1 x1)).
        numerical (np.ndarray): Central-difference divergence of the drift.
    """

    points: np.ndarray
    closed_form: np.ndarray
    numerical: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.numerical - self.closed_form))) if self.points.size else 0.0


def divergence_map(
    k1: float, k2: float, lam: float, alpha, grid: Union[int, np.ndarray] = 41, c0: float = 1.0
) -> DivergenceMap:
    """Closed-form and numerical divergence of the cellular drift.

    Args:
        grid: Points per axis over one period [-pi/k1, pi/k1] x [-pi/k2, pi/k2],
            or an explicit array of points.
    """
    alpha = parse_alpha(alpha)
    model = CellularModel(k1, k2, lam, c0)
    if np.isscalar(grid):
        a1 = np.linspace(-math.pi / abs(k1), math.pi / abs(k1), int(grid))
        a2 = np.linspace(-math.pi / abs(k2), math.pi / abs(k2), int(grid))
        points = np.stack(np.meshgrid(a1, a2, indexing="ij"), axis=-1)
    else:
        points = model.points(grid)
    return DivergenceMap(
        points=points,
        closed_form=cellular_diagnostics(model, alpha, points).div_minus_b,
        numerical=drift_divergence(model, alpha, points),
    )


def divergence_experiment(
    k1: float, k2: float, lam: float, alpha, grid: Union[int, np.ndarray] = 41, c0: float = 1.0,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Report form of ``divergence_map``; passes when both versions agree to 1e-6."""
    alpha = parse_alpha(alpha)
    field = divergence_map(k1, k2, lam, alpha, grid, c0)
    report = ExperimentReport("demo divergence", report_config or {
        "experiment": "divergence",
        "k1": k1,
        "k2": k2,
        "lambda": lam,
        "c0": c0,
        "alpha": format_alpha(alpha),
        "grid": grid if np.isscalar(grid) else np.asarray(grid).tolist(),
    })
    report.columns = ["x1", "x2", "closed_form", "numerical"]
    points = field.points.reshape(-1, 2)
    for x, exact, approx in zip(points, field.closed_form.ravel(), field.numerical.ravel()):
        report.records.append({"x1": float(x[0]), "x2": float(x[1]), "closed_form": float(exact), "numerical": float(approx)})
    report.add_row("max_abs_error", field.max_error, 0.0, int(points.shape[0]))
    report.add_row("max_divergence", float(np.max(field.closed_form)), 0.0, int(points.shape[0]))
    report.add_row("min_divergence", float(np.min(field.closed_form)), 0.0, int(points.shape[0]))
    report.checks["finite_difference_agrees"] = field.max_error <= 1e-6
    return report
