"""Separation of the alpha = 0 and alpha = inf limits.

Two pre-limit ensembles run with mu = eps^2 (fast relaxation, alpha -> 0) and
mu = eps^(1/2) (heavy particles, alpha -> inf). Both are coupled to the two
limit equations on the same Brownian paths, and each must stay closer to its
own limit than to the other one.
"""

import logging
import math
from dataclasses import replace
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ..common.config import EXPERIMENT_DEFAULTS
from ..drift.matrices import format_alpha
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec
from ..sde.coupled import CoupledSimulator, LimitSpec, SimConfig
from .convergence import step_grid
from .ensemble import EnsembleSpec, run_ensemble
from .report import ExperimentReport, position_columns, summarize

logger = logging.getLogger(__name__)

# pre-limit mass rule -> alpha of the limit it should follow
REGIMES = {"square": 0.0, "sqrt": math.inf}


def regime_separation_experiment(
    model: CoefficientModel,
    noise: NoiseSpec,
    eps: float,
    n_paths: int,
    T: float,
    dt_rule: Optional[Dict[str, float]] = None,
    x0: Optional[Sequence[float]] = None,
    seed: int = 42,
    control: bool = True,
    drift_method: str = "auto",
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
    report_config: Optional[Dict[str, Any]] = None,
) -> ExperimentReport:
    """Run both mass scalings against both limits.

    Checks:
        ``square_follows_alpha0`` / ``sqrt_follows_alphainf``: the paired
        difference of sup-distances (other limit minus own limit) exceeds
        three standard errors.
        ``terminal_gap``: the terminal positions of the two limits differ by
        more than three standard errors in some component.
        ``effect_exceeds_control``: both separations exceed three times the
        dt-halving discretization floor.
    """
    sigmas = EXPERIMENT_DEFAULTS["verdict_sigmas"]
    x0 = tuple(np.zeros(model.dim)) if x0 is None else tuple(float(v) for v in x0)
    dt, stride = step_grid(eps, dt_rule)
    limits = [LimitSpec(alpha) for alpha in REGIMES.values()]
    base = SimConfig(T=T, dt=dt, epsilon=eps, alpha=0.0, x0=x0, seed=seed, stride=stride,
                     drift_method=drift_method)
    EnsembleSpec(n_paths, base, [eps]).validate()

    config = report_config or {
        "experiment": "regimes",
        "model": model.name,
        "eps": eps,
        "n_paths": n_paths,
        "T": T,
        "dt_rule": dt_rule or {},
        "x0": list(x0),
        "seed": seed,
    }
    report = ExperimentReport("regimes", config)
    report.columns = ["trajectory_index", "eps", "mu", "alpha", "sup_distance"] + position_columns(
        "terminal_x", model.dim
    ) + ["flagged"]

    separations = {}
    batches = {}
    for rule, own in REGIMES.items():
        cfg = replace(base, mu_rule=rule, alpha=own)
        simulator = CoupledSimulator(cfg, model, noise, limits=limits)
        batch = run_ensemble(simulator, n_paths, workers, chunk_size)
        batches[rule] = batch
        keep = ~batch.flagged
        flagged = report.note_flagged(batch.flagged)
        own_name = LimitSpec(own).name
        other_name = next(spec.name for spec in limits if spec.name != own_name)

        for spec in limits:
            mean, se, n = summarize(batch.sup_distance[spec.name], keep)
            report.add_row(f"mu={rule}|{spec.name}", mean, se, n, flagged_fraction=flagged,
                           extra={"mu": simulator.mu, "dt": dt})

        gap, gap_se, n = summarize(batch.sup_distance[other_name] - batch.sup_distance[own_name], keep)
        separations[rule] = gap
        row = report.add_row(f"mu={rule}|separation", gap, gap_se, n, flagged_fraction=flagged)
        row.verdict = "pass" if gap > sigmas * gap_se else "fail"
        label = "alpha0" if own == 0.0 else "alphainf"
        report.checks[f"{rule}_follows_{label}"] = row.verdict == "pass"
        logger.info(f"mu rule {rule}: sup-distance to the other limit exceeds its own by {gap:.4g} +/- {gap_se:.2g}")

        terminal = batch.prelimit[:, -1, :]
        for spec in limits:
            for j, index in enumerate(batch.indices):
                report.records.append(
                    {"trajectory_index": int(index), "eps": eps, "mu": simulator.mu,
                     "alpha": format_alpha(spec.alpha),
                     "sup_distance": float(batch.sup_distance[spec.name][j]),
                     **{f"terminal_x{i + 1}": float(terminal[j, i]) for i in range(model.dim)},
                     "flagged": bool(batch.flagged[j])}
                )

    # both limits see the same Brownian path in either run
    batch = batches["square"]
    keep = ~batch.flagged
    gap_found = False
    for i in range(model.dim):
        delta = batch.limits[limits[0].name][:, -1, i] - batch.limits[limits[1].name][:, -1, i]
        mean, se, n = summarize(delta, keep)
        row = report.add_row(f"terminal_gap_x{i + 1}", mean, se, n)
        row.verdict = "pass" if abs(mean) > sigmas * se else "inconclusive"
        gap_found |= row.verdict == "pass"
    report.checks["terminal_gap"] = gap_found

    if control:
        cfg = replace(base, mu_rule="square", dt=dt / 2.0, stride=2 * stride, refine=1)
        control_batch = run_ensemble(CoupledSimulator(cfg, model, noise, limits=limits), n_paths, workers, chunk_size)
        report.note_flagged(control_batch.flagged)
        name = limits[0].name
        both = keep & ~control_batch.flagged
        change = np.abs(batch.sup_distance[name] - control_batch.sup_distance[name])
        floor, floor_se, n = summarize(change, both)
        report.add_row("control:dt/2", floor, floor_se, n, extra={"dt": dt / 2.0})
        report.checks["effect_exceeds_control"] = bool(min(separations.values()) > 3.0 * floor)

    return report
