import logging
import math
from abc import ABC, abstractmethod
from typing import Any, Dict, List

import numpy as np

from ..common.config import SIM_DEFAULTS
from ..common.errors import ConfigError
from ..drift.inertial import inertial_drift, scalar_drift
from ..drift.matrices import assemble_Q_alpha, compute_drift_matrices, format_alpha
from ..drift.turbulence import turbulence_drift
from ..harness.convergence import convergence_experiment, step_grid
from ..harness.covariance import covariance_experiment
from ..harness.phenomena import (
    cellular_experiment,
    divergence_experiment,
    turbophoresis_experiment,
    vortex_experiment,
)
from ..harness.regimes import regime_separation_experiment
from ..harness.report import ExperimentReport, position_columns
from ..models.catalog import ModelBundle, create_model
from ..models.scalar import ScalarFrictionModel
from ..sde.coupled import SimConfig, run_coupled
from .config_parser import RunConfig

logger = logging.getLogger(__name__)


class Command(ABC):
    """Base class for CLI commands.

    Subclasses declare a default model and default values for unset
    parameters; both are written back into the configuration before it is
    hashed, so the echoed configuration is the effective one.
    """

    name = ""
    default_model = "scalar"
    defaults: Dict[str, Any] = {}

    def __init__(self, config: RunConfig):
        self.config = config
        self.resolve()

    def resolve(self):
        cfg = self.config
        if cfg.model is None:
            cfg.model = self.default_model
        for key, value in self.defaults.items():
            current = getattr(cfg, key)
            if current is None or current == []:
                setattr(cfg, key, list(value) if isinstance(value, (list, tuple)) else value)

    def bundle(self) -> ModelBundle:
        return create_model(self.config.model, self.config.params, self.config.noise)

    def point(self, dim: int) -> List[float]:
        x = self.config.x
        if x is None:
            return [0.0] * dim
        if len(x) != dim:
            raise ConfigError(f"expected {dim} coordinates, got {len(x)}", "x")
        return list(x)

    def new_report(self) -> ExperimentReport:
        return ExperimentReport(self.name, self.config.to_dict())

    @abstractmethod
    def run(self) -> ExperimentReport:
        """Execute the command and return its report."""
        pass


class DriftCommand(Command):
    """Evaluate f_alpha and the full limit drift at one point for every alpha."""

    name = "drift"

    def run(self) -> ExperimentReport:
        bundle = self.bundle()
        model, noise = bundle.model, bundle.noise
        x = self.point(model.dim)
        report = self.new_report()
        report.columns = ["alpha"] + position_columns("x", model.dim) + position_columns("f", model.dim) + \
            position_columns("drift", model.dim)

        b = np.einsum("ij,j->i", model.gamma_inv(x), model.b(x))
        f_zero = inertial_drift(model, noise, 0.0, x)
        for alpha in self.config.alpha:
            f = inertial_drift(model, noise, alpha, x)
            for i, value in enumerate(f):
                report.add_row(f"f_{i + 1}", float(value), 0.0, 1, extra={"alpha": format_alpha(alpha)})
            report.records.append({
                "alpha": format_alpha(alpha),
                **{f"x{i + 1}": x[i] for i in range(model.dim)},
                **{f"f{i + 1}": float(f[i]) for i in range(model.dim)},
                **{f"drift{i + 1}": float(b[i] + f[i]) for i in range(model.dim)},
            })

            if isinstance(model, ScalarFrictionModel) and noise.is_identity_relaxation:
                closed = scalar_drift(model, noise, alpha, x)
                report.checks[f"closed_form[{format_alpha(alpha)}]"] = bool(np.max(np.abs(closed - f)) <= 1e-8)
            if bundle.turbulence is not None:
                minus_b = turbulence_drift(bundle.turbulence, alpha, x)
                for i, value in enumerate(minus_b):
                    report.add_row(f"-b_{i + 1}", float(value), 0.0, 1, extra={"alpha": format_alpha(alpha)})
                report.checks[f"stratonovich_split[{format_alpha(alpha)}]"] = bool(
                    np.max(np.abs(minus_b - (f - f_zero))) <= 1e-8
                )
            logger.info(f"alpha={format_alpha(alpha)}: f = {np.array2string(f, precision=6)}")
        return report


class MatricesCommand(Command):
    """Frozen-system covariance blocks at one point for every alpha."""

    name = "matrices"

    def run(self) -> ExperimentReport:
        bundle = self.bundle()
        model, noise = bundle.model, bundle.noise
        x = self.point(model.dim)
        report = self.new_report()
        report.columns = ["alpha", "block", "row", "col", "value"]

        for alpha in self.config.alpha:
            matrices = compute_drift_matrices(model, noise, alpha, x)
            blocks = {"M": matrices.M, "L": matrices.L_alpha, "N": matrices.N_alpha, "alphaN": matrices.alphaN}
            for block, values in blocks.items():
                for (i, j), value in np.ndenumerate(values):
                    name = f"{block}_{i + 1}_{j + 1}"
                    report.add_row(name, float(value), 0.0, 1, extra={"alpha": format_alpha(alpha)})
                    report.records.append(
                        {"alpha": format_alpha(alpha), "block": block, "row": i + 1, "col": j + 1, "value": float(value)}
                    )
            if 0.0 < alpha < math.inf:
                d = model.dim
                Q = assemble_Q_alpha(model, noise, alpha, x)
                error = max(
                    float(np.max(np.abs(Q[:d, :d] - matrices.N_alpha))),
                    float(np.max(np.abs(Q[:d, d:] - matrices.L_alpha))),
                    float(np.max(np.abs(Q[d:, d:] - matrices.M))),
                )
                scale = 1.0 + float(np.max(np.abs(Q)))
                report.checks[f"block_consistency[{format_alpha(alpha)}]"] = error <= 1e-9 * scale
        return report


class SimulateCommand(Command):
    """One coupled trajectory of the inertial system and its limit."""

    name = "simulate"
    default_model = "scalar-sine"
    defaults = {"T": SIM_DEFAULTS["T"], "eps": [SIM_DEFAULTS["epsilon"]]}

    def run(self) -> ExperimentReport:
        cfg = self.config
        bundle = self.bundle()
        model, noise = bundle.model, bundle.noise
        if len(cfg.eps) != 1:
            raise ConfigError("simulate takes a single eps", "eps")
        eps = cfg.eps[0]
        dt, stride = step_grid(eps, {"dt_limit": cfg.dt} if cfg.dt else None)
        sim = SimConfig(T=cfg.T, dt=dt, epsilon=eps, alpha=cfg.single_alpha, mu_rule=cfg.mu_rule, mu=cfg.mu,
                        x0=tuple(self.point(model.dim)), seed=cfg.seed, stride=stride)
        run = run_coupled(sim, model, noise)

        report = self.new_report()
        d = model.dim
        report.columns = ["t"] + position_columns("x_eps", d) + position_columns("x_limit", d) + ["distance"]
        distance = np.linalg.norm(run.prelimit.x - run.limit.x, axis=-1)
        for k, t in enumerate(run.prelimit.times):
            report.records.append({
                "t": float(t),
                **{f"x_eps{i + 1}": float(run.prelimit.x[k, i]) for i in range(d)},
                **{f"x_limit{i + 1}": float(run.limit.x[k, i]) for i in range(d)},
                "distance": float(distance[k]),
            })
        report.add_row("sup_distance", run.sup_distance, 0.0, 1, extra={"eps": eps, "dt": dt, "stride": stride})
        return report


class ConvergeCommand(Command):
    name = "converge"
    default_model = "scalar-sine"
    defaults = {"T": 1.0, "eps": [0.1, 0.05, 0.02, 0.01]}

    def run(self) -> ExperimentReport:
        cfg = self.config
        bundle = self.bundle()
        return convergence_experiment(
            bundle.model, bundle.noise, cfg.single_alpha, cfg.eps, cfg.n_paths, cfg.T,
            dt_rule={"dt_limit": cfg.dt} if cfg.dt else None,
            eta=cfg.eta, mu_rule=cfg.mu_rule, x0=self.point(bundle.model.dim), seed=cfg.seed,
            workers=cfg.workers, chunk_size=cfg.chunk_size, report_config=cfg.to_dict(),
        )


class CovarianceCommand(Command):
    name = "covariance"
    defaults = {"T": 100.0, "dt": 0.01}

    def run(self) -> ExperimentReport:
        cfg = self.config
        bundle = self.bundle()
        return covariance_experiment(
            bundle.model, bundle.noise, cfg.single_alpha, self.point(bundle.model.dim), cfg.T, cfg.dt, cfg.n_paths,
            burn_in=cfg.burn_in, seed=cfg.seed, workers=cfg.workers, chunk_size=cfg.chunk_size,
            report_config=cfg.to_dict(),
        )


class RegimesCommand(Command):
    name = "regimes"
    default_model = "scalar-sine-xi"
    defaults = {"T": 1.0, "eps": [1e-3]}

    def run(self) -> ExperimentReport:
        cfg = self.config
        if len(cfg.eps) != 1:
            raise ConfigError("regimes takes a single eps", "eps")
        bundle = self.bundle()
        return regime_separation_experiment(
            bundle.model, bundle.noise, cfg.eps[0], cfg.n_paths, cfg.T,
            dt_rule={"dt_limit": cfg.dt} if cfg.dt else None,
            x0=self.point(bundle.model.dim), seed=cfg.seed,
            workers=cfg.workers, chunk_size=cfg.chunk_size, report_config=cfg.to_dict(),
        )


class DemoCommand(Command):
    """Turbulence scenarios: vortex, cellular, turbophoresis and divergence."""

    name = "demo"

    SCENARIOS = {
        "vortex": {"model": "vortex", "T": 1.0, "params": {}},
        "cellular": {"model": "cellular", "T": 5.0, "params": {"k1": 2.0, "k2": 2.0}},
        "turbophoresis": {"model": "pipe", "T": 2.0, "params": {}},
        "divergence": {"model": "cellular", "T": None, "params": {}},
    }

    def resolve(self):
        cfg = self.config
        scenario = self.SCENARIOS[cfg.scenario]
        if cfg.model is not None and cfg.model != scenario["model"]:
            raise ConfigError(f"demo {cfg.scenario} runs the {scenario['model']} model", "model")
        cfg.model = scenario["model"]
        cfg.params = {**scenario["params"], **cfg.params}
        if cfg.T is None:
            cfg.T = scenario["T"]
        if cfg.dt is None and cfg.scenario != "divergence":
            cfg.dt = SIM_DEFAULTS["dt"]

    def run(self) -> ExperimentReport:
        cfg = self.config
        turbulence = self.bundle().turbulence
        common = dict(seed=cfg.seed, workers=cfg.workers, chunk_size=cfg.chunk_size, report_config=cfg.to_dict())

        if cfg.scenario == "vortex":
            return vortex_experiment(cfg.alpha, cfg.n_paths, cfg.T, dt=cfg.dt, turbulence=turbulence, **common)
        if cfg.scenario == "turbophoresis":
            return turbophoresis_experiment(cfg.single_alpha, cfg.n_paths, cfg.T, dt=cfg.dt, turbulence=turbulence, **common)
        if cfg.scenario == "cellular":
            return cellular_experiment(
                turbulence.k1, turbulence.k2, turbulence.lam, cfg.single_alpha, cfg.n_paths, cfg.T, cfg.delta,
                c0=turbulence.c0, dt=cfg.dt, **common,
            )
        return divergence_experiment(
            turbulence.k1, turbulence.k2, turbulence.lam, cfg.single_alpha, cfg.grid, c0=turbulence.c0,
            report_config=cfg.to_dict(),
        )


COMMANDS = {
    cls.name: cls
    for cls in (
        DriftCommand,
        MatricesCommand,
        SimulateCommand,
        ConvergeCommand,
        CovarianceCommand,
        RegimesCommand,
        DemoCommand,
    )
}


def create_command(config: RunConfig) -> Command:
    """Create the command named by the configuration.

    Raises:
        ConfigError: If the command is unknown.
    """
    command_class = COMMANDS.get(config.command)
    if not command_class:
        raise ConfigError(f"Unknown command: {config.command}", "command")
    return command_class(config)
