import logging
import math
from dataclasses import replace
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..common.config import EXPERIMENT_DEFAULTS
from ..common.errors import ConfigError
from ..drift.matrices import format_alpha, parse_alpha
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec
from ..sde.coupled import CoupledSimulator, SimConfig
from .ensemble import EnsembleSpec, run_ensemble
from .report import ExperimentReport, joint_standard_error, position_columns, summarize

logger = logging.getLogger(__name__)


def step_grid(epsilon: float, dt_rule: Optional[Dict[str, float]] = None):
    """Pre-limit step and limit stride for one eps.

    The pre-limit step is min(fraction * eps, dt_limit), shrunk so that a
    whole number of pre-limit steps fits in one limit step.
    """
    rule = dict(pre_dt_fraction=EXPERIMENT_DEFAULTS["pre_dt_fraction"], dt_limit=EXPERIMENT_DEFAULTS["dt_limit"])
    rule.update(dt_rule or {})
    dt_limit = float(rule["dt_limit"])
    dt = min(rule["pre_dt_fraction"] * epsilon, dt_limit)
    stride = max(1, int(round(dt_limit / dt)))
    return dt_limit / stride, stride


def fractions_nonincreasing(fractions: Sequence[float], stderrs: Sequence[float]) -> bool:
    """True when no fraction rises above its predecessor by more than their joint standard error."""
    return all(
        cur - prev <= joint_standard_error(se_prev, se_cur)
        for prev, cur, se_prev, se_cur in zip(fractions, fractions[1:], stderrs, stderrs[1:])
    )


def convergence_experiment(
    model: CoefficientModel,
    noise: NoiseSpec,
    alpha,
    eps_list: Sequence[float],
    n_paths: int,
    T: float,
    dt_rule: Optional[Dict[str, float]] = None,
    eta: Optional[float] = None,
    mu_rule: str = "alpha",
    x0: Optional[Sequence[float]] = None,
    seed: int = 42,
    control: bool = True,
    drift_method: str = "auto",
    cache_resolution: Optional[float] = None,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Coupled sup-distance between the inertial system and its limit, per eps.

    Each row holds E[sup_t |x_eps - x_alpha|] with its standard error and the
    fraction of paths whose sup-distance exceeds ``eta``. A row passes when
    the mean per-path decrease from its predecessor exceeds the standard
    error of that decrease. The exceed fraction may rise by at most one joint
    standard error between neighbouring eps and must end below
    ``max_exceed_fraction``. The control row reruns the smallest eps at half the step on the
    same Brownian paths; the mean paired change is the discretization floor,
    which the total decrease must exceed three times over.
    """
    alpha = parse_alpha(alpha)
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) > 1 and not np.all(np.diff(eps_list) < 0.0):
        raise ConfigError("eps values must be strictly decreasing", "eps")
    eta = EXPERIMENT_DEFAULTS["eta"] if eta is None else float(eta)
    x0 = tuple(np.zeros(model.dim)) if x0 is None else tuple(float(v) for v in x0)

    base = SimConfig(T=T, epsilon=eps_list[0], alpha=alpha, mu_rule=mu_rule, x0=x0, seed=seed,
                     drift_method=drift_method, cache_resolution=cache_resolution)
    EnsembleSpec(n_paths, base, eps_list).validate()

    config = report_config or {
        "experiment": "convergence",
        "model": model.name,
        "alpha": format_alpha(alpha),
        "eps": eps_list,
        "n_paths": n_paths,
        "T": T,
        "dt_rule": dt_rule or {},
        "eta": eta,
        "mu_rule": mu_rule,
        "x0": list(x0),
        "seed": seed,
    }
    report = ExperimentReport("converge", config)
    report.columns = ["trajectory_index", "eps", "mu", "alpha", "sup_distance"] + position_columns(
        "terminal_x", model.dim
    ) + ["flagged"]

    estimates, exceed, exceed_se = [], [], []
    previous = None
    last = None
    for eps in eps_list:
        dt, stride = step_grid(eps, dt_rule)
        cfg = replace(base, epsilon=eps, dt=dt, stride=stride)
        simulator = CoupledSimulator(cfg, model, noise)
        batch = run_ensemble(simulator, n_paths, workers, chunk_size)
        name = simulator.limits[0].name
        sup = batch.sup_distance[name]
        keep = ~batch.flagged
        flagged = report.note_flagged(batch.flagged)

        mean, se, n = summarize(sup, keep)
        p = float(np.mean(sup[keep] > eta)) if n else math.nan
        p_se = math.sqrt(p * (1.0 - p) / n) if n else math.nan
        row = report.add_row(
            eps, mean, se, n, flagged_fraction=flagged,
            extra={"mu": simulator.mu, "dt": dt, "stride": stride,
                   "exceed_fraction": p, "exceed_stderr": p_se},
        )
        if previous is not None:
            gap, gap_se, _ = summarize(previous[0] - sup, previous[1] & keep)
            row.extra["paired_decrease"] = gap
            row.verdict = "decrease" if gap > gap_se else "inconclusive"
        previous = (sup, keep)
        estimates.append(mean)
        exceed.append(p)
        exceed_se.append(p_se)
        logger.info(f"eps={eps:.4g}: E sup-distance {mean:.4g} +/- {se:.2g}, P(> {eta}) = {p:.3f}")

        terminal = batch.prelimit[:, -1, :]
        for j, index in enumerate(batch.indices):
            report.records.append(
                {"trajectory_index": int(index), "eps": eps, "mu": simulator.mu, "alpha": format_alpha(alpha),
                 "sup_distance": float(sup[j]),
                 **{f"terminal_x{i + 1}": float(terminal[j, i]) for i in range(model.dim)},
                 "flagged": bool(batch.flagged[j])}
            )
        last = (cfg, batch, name)

    report.checks["sup_distance_decreasing"] = all(r.verdict == "decrease" for r in report.rows[1:])
    report.checks["exceed_fraction_nonincreasing"] = fractions_nonincreasing(exceed, exceed_se)
    report.checks["exceed_fraction_final"] = bool(exceed[-1] < EXPERIMENT_DEFAULTS["max_exceed_fraction"])

    if control and last is not None:
        cfg, batch, name = last
        half = replace(cfg, dt=cfg.dt / 2.0, stride=2 * cfg.stride, refine=cfg.refine + 1)
        control_batch = run_ensemble(CoupledSimulator(half, model, noise), n_paths, workers, chunk_size)
        keep = ~(batch.flagged | control_batch.flagged)
        report.note_flagged(control_batch.flagged)
        change = np.abs(batch.sup_distance[name] - control_batch.sup_distance[name])
        floor, floor_se, n = summarize(change, keep)
        mean, se, _ = summarize(control_batch.sup_distance[name], keep)
        report.add_row(
            "control:dt/2", mean, se, n, flagged_fraction=float(np.mean(control_batch.flagged)),
            extra={"eps": cfg.epsilon, "dt": half.dt, "discretization_floor": floor,
                   "discretization_floor_stderr": floor_se},
        )
        effect = estimates[0] - estimates[-1]
        report.checks["effect_exceeds_control"] = bool(effect > 3.0 * floor)
        logger.info(f"Discretization floor {floor:.3g} against total decrease {effect:.3g}")

    return report
