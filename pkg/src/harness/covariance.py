"""Ergodic averages of the frozen fast system against its covariance blocks."""

import logging
import math
from functools import partial
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..common.config import EXPERIMENT_DEFAULTS
from ..common.errors import ConfigError
from ..drift.matrices import MixingRate, compute_drift_matrices, format_alpha, parse_alpha
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec
from ..sde.frozen import simulate_frozen_fast
from .ensemble import chunk_indices, parallel_map
from .report import ExperimentReport, joint_standard_error, standard_error

logger = logging.getLogger(__name__)


def _entries(dim_rows: int, dim_cols: int, symmetric: bool):
    for i in range(dim_rows):
        for j in range(i if symmetric else 0, dim_cols):
            yield i, j


def _moments_chunk(indices, x_frozen, model, noise, alpha, T, dt, burn_in, seed):
    """Time-averaged second moments per replica after burn-in."""
    path = simulate_frozen_fast(
        x_frozen, model, noise, alpha, T, dt, seed, replicas=len(indices), first_index=int(indices[0])
    )
    keep = path.times >= burn_in
    u, z = path.u[:, keep], path.z[:, keep]
    return {
        "N": np.einsum("rti,rtj->rij", u, u) / u.shape[1],
        "L": np.einsum("rti,rtj->rij", u, z) / u.shape[1],
        "M": np.einsum("rti,rtj->rij", z, z) / z.shape[1],
    }


def frozen_moments(x_frozen, model, noise, alpha, T, dt, burn_in, n_reps, seed, workers=None, chunk_size=None):
    """Per-replica moment matrices, stacked in replica order."""
    task = partial(
        _moments_chunk, x_frozen=x_frozen, model=model, noise=noise, alpha=alpha,
        T=T, dt=dt, burn_in=burn_in, seed=seed,
    )
    chunks = parallel_map(task, chunk_indices(n_reps, chunk_size), workers)
    return {key: np.concatenate([c[key] for c in chunks], axis=0) for key in ("N", "L", "M")}


def z_score(estimate: float, target: float, stderr: float) -> float:
    if stderr > 0.0:
        return (estimate - target) / stderr
    return 0.0 if abs(estimate - target) <= 1e-12 else math.inf


def covariance_experiment(
    model: CoefficientModel,
    noise: NoiseSpec,
    alpha,
    x_frozen: Sequence[float],
    T: float,
    dt: float,
    n_reps: int,
    burn_in: Optional[float] = None,
    seed: int = 42,
    control: bool = True,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Compare ergodic averages of (u, z) with the blocks (N_alpha, L_alpha, M).

    Every distinct entry gets a row with its replica mean, standard error,
    target and z-score; an entry passes when |z| <= 3. The control row
    repeats the run at dt / 2 and checks that no entry moves by more than
    three joint standard errors.

    Args:
        x_frozen (Sequence[float]): Frozen slow variable.
        T (float): Length of each replica, burn-in included.
        burn_in (Optional[float]): Discarded initial time; defaults to eight
            mixing times.

    Raises:
        ConfigError: If alpha is not finite and positive, n_reps < 2 or the
            burn-in leaves no samples.
    """
    alpha = parse_alpha(alpha)
    if alpha == 0.0 or math.isinf(alpha):
        raise ConfigError("the covariance experiment needs a finite positive alpha", "alpha")
    if n_reps < 2:
        raise ConfigError(f"need at least 2 replicas, got {n_reps}", "n_paths")

    rate = MixingRate.compute(model, noise, alpha)
    if burn_in is None:
        burn_in = rate.burn_in(EXPERIMENT_DEFAULTS["burn_in_mixing_times"])
    minimum = rate.burn_in(EXPERIMENT_DEFAULTS["min_burn_in_mixing_times"])
    if burn_in < minimum:
        logger.warning(f"burn-in {burn_in:.3g} is shorter than {minimum:.3g} (4 mixing times)")
    if burn_in >= T:
        raise ConfigError(f"burn-in {burn_in:.3g} leaves no samples before T={T}", "T")

    x_frozen = [float(v) for v in x_frozen]
    config = report_config or {
        "experiment": "covariance",
        "model": model.name,
        "alpha": format_alpha(alpha),
        "x_frozen": x_frozen,
        "T": T,
        "dt": dt,
        "n_paths": n_reps,
        "burn_in": burn_in,
        "seed": seed,
    }
    report = ExperimentReport("covariance", config)
    report.notes.append(f"mixing rate {rate.omega_alpha:.6g}, burn-in {burn_in:.6g}")

    matrices = compute_drift_matrices(model, noise, alpha, x_frozen)
    targets = {"N": matrices.N_alpha, "L": matrices.L_alpha, "M": matrices.M}
    shapes = {"N": True, "L": False, "M": True}

    moments = frozen_moments(x_frozen, model, noise, alpha, T, dt, burn_in, n_reps, seed, workers, chunk_size)
    if control:
        halved = frozen_moments(x_frozen, model, noise, alpha, T, dt / 2.0, burn_in, n_reps, seed, workers, chunk_size)

    names = []
    worst_shift = 0.0
    for block, symmetric in shapes.items():
        target = targets[block]
        for i, j in _entries(target.shape[0], target.shape[1], symmetric):
            name = f"{block}_{i + 1}_{j + 1}"
            names.append((name, block, i, j))
            samples = moments[block][:, i, j]
            estimate, se = float(np.mean(samples)), standard_error(samples)
            score = z_score(estimate, float(target[i, j]), se)
            report.add_row(
                name, estimate, se, n_reps,
                verdict="pass" if abs(score) <= EXPERIMENT_DEFAULTS["verdict_sigmas"] else "fail",
                extra={"target": float(target[i, j]), "z_score": score},
            )
            if control:
                other = halved[block][:, i, j]
                shift = abs(float(np.mean(other)) - estimate)
                scale = joint_standard_error(se, standard_error(other))
                worst_shift = max(worst_shift, z_score(shift, 0.0, scale))
            logger.info(f"{name}: {estimate:.5g} +/- {se:.2g} (target {float(target[i, j]):.5g}, z = {score:.2f})")

    report.checks["entries_within_3se"] = all(row.verdict == "pass" for row in report.rows)
    if control:
        report.add_row("control:dt/2", worst_shift, 0.0, n_reps, extra={"dt": dt / 2.0})
        report.checks["control_agrees"] = worst_shift <= EXPERIMENT_DEFAULTS["verdict_sigmas"]

    report.columns = ["replica"] + [name for name, *_ in names]
    for r in range(n_reps):
        report.records.append(
            {"replica": r, **{name: float(moments[block][r, i, j]) for name, block, i, j in names}}
        )
    return report
