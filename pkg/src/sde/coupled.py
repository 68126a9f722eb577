"""Pathwise coupling of the inertial system with its limit equations.

The pre-limit integrator and every limit integrator of a trajectory consume
the same Brownian path: the OU driver is sampled jointly with the fine-grid
increments, and the limit grid (``stride`` fine steps per coarse step) sums
them.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..common.config import SIM_DEFAULTS
from ..common.errors import BlowUpError, ConfigError
from ..drift.inertial import DriftProvider
from ..drift.matrices import format_alpha, parse_alpha
from ..models.base import CoefficientModel
from ..models.noise import NoiseSpec
from ..models.turbulence import TurbulenceModel
from .brownian import BrownianStream, StreamBatch, stream_generator
from .integrators import InertialState, freeze_flagged, inertial_step, limit_step, transport_split_step
from .ou import OUTransition

logger = logging.getLogger(__name__)

MU_RULES = ("alpha", "square", "sqrt", "fixed")


@dataclass
class SimConfig:
    """Integration parameters of one coupled run.

    Attributes:
        T (float): Horizon.
        dt (float): Pre-limit step.
        epsilon (float): OU correlation time.
        alpha (float): Extended real in [0, inf] used by the limit equation.
        mu_rule (str): ``alpha`` (mu = alpha eps), ``square`` (eps^2),
            ``sqrt`` (eps^(1/2)), ``fixed`` (use ``mu``) or ``power:g`` (eps^g).
        mu (Optional[float]): Mass for the ``fixed`` rule.
        x0 (Sequence[float]): Initial position.
        v0 (Optional[Sequence[float]]): Initial velocity, zero by default.
        seed (int): Master seed.
        trajectory_index (int): Trajectory used by ``run_coupled``.
        stride (int): Fine steps per limit step.
        refine (int): Brownian-bridge bisections of the random stream; a run
            with dt / 2^r and refine r shares the Brownian path of a run with dt.
        drift_method (str): DriftProvider method.
        cache_resolution (Optional[float]): Lattice spacing of the drift cache.
    """

    T: float = SIM_DEFAULTS["T"]
    dt: float = SIM_DEFAULTS["dt"]
    epsilon: float = SIM_DEFAULTS["epsilon"]
    alpha: float = SIM_DEFAULTS["alpha"]
    mu_rule: str = SIM_DEFAULTS["mu_rule"]
    mu: Optional[float] = None
    x0: Sequence[float] = (0.0,)
    v0: Optional[Sequence[float]] = None
    seed: int = SIM_DEFAULTS["seed"]
    trajectory_index: int = 0
    stride: int = 1
    refine: int = 0
    drift_method: str = "auto"
    cache_resolution: Optional[float] = None

    def __post_init__(self):
        self.alpha = parse_alpha(self.alpha)

    @property
    def n_steps(self) -> int:
        """Fine steps, rounded up to whole limit steps and whole base steps."""
        fine = int(math.ceil(self.T / self.dt - 1e-9))
        unit = math.lcm(int(self.stride), 2 ** int(self.refine))
        return int(math.ceil(fine / unit)) * unit

    @property
    def dt_limit(self) -> float:
        return self.dt * self.stride

    def resolve_mu(self) -> float:
        rule = self.mu_rule
        if rule == "fixed":
            if self.mu is None:
                raise ConfigError("the fixed mass rule needs a value for mu", "mu")
            return float(self.mu)
        if rule == "alpha":
            if self.alpha == 0.0 or math.isinf(self.alpha):
                raise ConfigError("mu = alpha * eps needs a finite positive alpha", "mu_rule")
            return self.alpha * self.epsilon
        if rule == "square":
            return self.epsilon**2
        if rule == "sqrt":
            return math.sqrt(self.epsilon)
        if rule.startswith("power:"):
            try:
                return self.epsilon ** float(rule.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"cannot parse mass exponent in {rule!r}", "mu_rule") from None
        raise ConfigError(f"Unknown mass rule: {rule}", "mu_rule")

    def validate(self, dim: Optional[int] = None, prelimit: bool = True) -> Optional[float]:
        """Check preconditions and return the resolved mass.

        Limit-only runs (``prelimit=False``) have no mass and return None.

        Raises:
            ConfigError: On any violated precondition.
        """
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}", "dt")
        if not self.T >= self.dt:
            raise ConfigError(f"T must be at least dt, got T={self.T}", "T")
        if not self.epsilon > 0.0:
            raise ConfigError(f"eps must be positive, got {self.epsilon}", "eps")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ConfigError(f"stride must be a positive integer, got {self.stride}", "stride")
        if int(self.refine) != self.refine or self.refine < 0:
            raise ConfigError(f"refine must be a nonnegative integer, got {self.refine}", "refine")
        if dim is not None and len(self.x0) != dim:
            raise ConfigError(f"x0 must have {dim} entries, got {len(self.x0)}", "x0")
        if dim is not None and self.v0 is not None and len(self.v0) != dim:
            raise ConfigError(f"v0 must have {dim} entries, got {len(self.v0)}", "v0")
        if not prelimit:
            return None
        mu = self.resolve_mu()
        if not mu > 0.0:
            raise ConfigError(f"mu must be positive, got {mu}", "mu")
        # the velocity scheme is exponential, so only the OU time scale limits dt
        if self.dt > self.epsilon / SIM_DEFAULTS["resolution_factor"]:
            logger.warning(
                f"dt={self.dt:.3g} does not resolve the noise correlation time eps={self.epsilon:.3g}"
            )
        return mu

    def to_dict(self) -> dict:
        data = asdict(self)
        data["alpha"] = format_alpha(self.alpha)
        data["x0"] = list(self.x0)
        data["v0"] = None if self.v0 is None else list(self.v0)
        return data


@dataclass(frozen=True)
class LimitSpec:
    """One limit equation to integrate alongside the pre-limit system.

    ``integrator`` is ``euler`` (Ito Euler-Maruyama with the inertial drift)
    or ``split`` (Stratonovich transport splitting, turbulence models only).
    """

    alpha: float
    integrator: str = "euler"
    label: Optional[str] = None

    @property
    def name(self) -> str:
        return self.label or f"alpha={format_alpha(parse_alpha(self.alpha))}"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Discretized path. v and z are only present for the pre-limit system."""

    times: np.ndarray
    x: np.ndarray
    v: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    flagged: bool = False


@dataclass(eq=False)
class PathBatch:
    """Result of simulating a group of trajectories.

    Attributes:
        indices (np.ndarray): Trajectory indices, shape (P,).
        times (np.ndarray): Recorded times on the limit grid, shape (R,).
        initial (np.ndarray): Initial positions, shape (P, d).
        prelimit (Optional[np.ndarray]): Recorded pre-limit positions, (P, R, d).
        limits (Dict[str, np.ndarray]): Recorded limit positions per limit name.
        sup_distance (Dict[str, np.ndarray]): Max over the limit grid of
            |x_eps - x_limit| per limit name, shape (P,).
        flagged (np.ndarray): Paths that produced a non-finite state.
        velocity, ou_state: Recorded pre-limit v and z when requested.
    """

    indices: np.ndarray
    times: np.ndarray
    initial: np.ndarray
    prelimit: Optional[np.ndarray]
    limits: Dict[str, np.ndarray]
    sup_distance: Dict[str, np.ndarray]
    flagged: np.ndarray
    velocity: Optional[np.ndarray] = None
    ou_state: Optional[np.ndarray] = None

    @classmethod
    def concatenate(cls, batches: List["PathBatch"]) -> "PathBatch":
        def cat(values):
            return None if values[0] is None else np.concatenate(values, axis=0)

        first = batches[0]
        return cls(
            indices=cat([b.indices for b in batches]),
            times=first.times,
            initial=cat([b.initial for b in batches]),
            prelimit=cat([b.prelimit for b in batches]),
            limits={k: cat([b.limits[k] for b in batches]) for k in first.limits},
            sup_distance={k: cat([b.sup_distance[k] for b in batches]) for k in first.sup_distance},
            flagged=cat([b.flagged for b in batches]),
            velocity=cat([b.velocity for b in batches]),
            ou_state=cat([b.ou_state for b in batches]),
        )


class CoupledSimulator:
    """Vectorized simulation of coupled pre-limit and limit trajectories.

    Args:
        config (SimConfig): Integration parameters.
        model (CoefficientModel): Coefficient fields.
        noise (NoiseSpec): OU driver.
        limits (Optional[Sequence[LimitSpec]]): Limit equations; defaults to
            the Euler scheme at ``config.alpha``.
        prelimit (bool): Integrate the inertial system as well.
        turbulence (Optional[TurbulenceModel]): Needed by ``split`` limits.
        initial_sampler (Optional[Callable]): Draws x0 from a per-trajectory
            generator; ``config.x0`` is used otherwise.
        record_every (Optional[int]): Record every k-th limit step; only the
            endpoints are kept when None.
        record_state (bool): Also record pre-limit v and z.
    """

    def __init__(
        self,
        config: SimConfig,
        model: CoefficientModel,
        noise: NoiseSpec,
        limits: Optional[Sequence[LimitSpec]] = None,
        prelimit: bool = True,
        turbulence: Optional[TurbulenceModel] = None,
        initial_sampler: Optional[Callable[[np.random.Generator], np.ndarray]] = None,
        record_every: Optional[int] = None,
        record_state: bool = False,
    ):
        self.mu = config.validate(model.dim if initial_sampler is None else None, prelimit)
        self.config = config
        self.model = model
        self.noise = noise
        self.limits = list(limits) if limits is not None else [LimitSpec(config.alpha)]
        self.prelimit = prelimit
        self.turbulence = turbulence
        self.initial_sampler = initial_sampler
        self.record_every = record_every
        self.record_state = record_state and prelimit

        self.providers = {}
        for spec in self.limits:
            if spec.integrator == "split":
                if turbulence is None:
                    raise ConfigError("the splitting integrator needs a turbulence model", "integrator")
            elif spec.integrator == "euler":
                self.providers[spec.name] = DriftProvider(
                    model, noise, spec.alpha, config.drift_method, config.cache_resolution
                )
            else:
                raise ConfigError(f"Unknown integrator: {spec.integrator}", "integrator")
        self.transition = OUTransition(noise, config.epsilon, config.dt) if prelimit else None

    def _initial(self, indices: np.ndarray) -> np.ndarray:
        if self.initial_sampler is None:
            x0 = np.asarray(self.config.x0, dtype=float)
            return np.tile(x0, (len(indices), 1))
        return np.stack(
            [
                np.asarray(self.initial_sampler(stream_generator(self.config.seed, i, "initial")), float)
                for i in indices
            ]
        )

    def _limit_step(self, spec: LimitSpec, x: np.ndarray, dW: np.ndarray) -> np.ndarray:
        if spec.integrator == "split":
            return transport_split_step(x, self.turbulence, spec.alpha, self.config.dt_limit, dW)
        return limit_step(x, self.providers[spec.name], self.config.dt_limit, dW)

    def run(self, indices) -> PathBatch:
        cfg = self.config
        indices = np.asarray(indices, dtype=int)
        P, d, m, n = len(indices), self.model.dim, self.noise.m, self.noise.n

        x0 = self._initial(indices)
        v0 = np.zeros((P, d)) if cfg.v0 is None else np.tile(np.asarray(cfg.v0, float), (P, 1))
        state = InertialState(x0.copy(), v0, np.zeros((P, n)))
        limit_x = {spec.name: x0.copy() for spec in self.limits}
        sup = {spec.name: np.zeros(P) for spec in self.limits}
        flagged = np.zeros(P, dtype=bool)

        streams = StreamBatch(
            BrownianStream(cfg.seed, i, m, cfg.dt, extra=n, refine=cfg.refine) for i in indices
        )
        dW_sum = np.zeros((P, m))

        times = [0.0]
        pre_rec = [state.x.copy()]
        v_rec, z_rec = [state.v.copy()], [state.z.copy()]
        lim_rec = {name: [x.copy()] for name, x in limit_x.items()}
        coarse_steps = cfg.n_steps // cfg.stride

        for k in range(1, cfg.n_steps + 1):
            dW, innovation = streams.next()
            dW_sum += dW
            if self.prelimit:
                with np.errstate(over="ignore", invalid="ignore"):
                    candidate = inertial_step(
                        state, self.model, self.noise, self.mu, cfg.epsilon, cfg.dt,
                        innovation, dW=dW, transition=self.transition,
                    )
                flagged |= ~candidate.is_finite()
                state = freeze_flagged(state, candidate, flagged)

            if k % cfg.stride:
                continue

            for spec in self.limits:
                with np.errstate(over="ignore", invalid="ignore"):
                    candidate = self._limit_step(spec, limit_x[spec.name], dW_sum)
                flagged |= ~np.all(np.isfinite(candidate), axis=-1)
                limit_x[spec.name] = np.where(flagged[:, None], limit_x[spec.name], candidate)
                if self.prelimit:
                    gap = np.linalg.norm(state.x - limit_x[spec.name], axis=-1)
                    sup[spec.name] = np.maximum(sup[spec.name], gap)
            dW_sum[:] = 0.0

            coarse = k // cfg.stride
            if (self.record_every and coarse % self.record_every == 0) or coarse == coarse_steps:
                times.append(coarse * cfg.dt_limit)
                pre_rec.append(state.x.copy())
                v_rec.append(state.v.copy())
                z_rec.append(state.z.copy())
                for name, x in limit_x.items():
                    lim_rec[name].append(x.copy())

        if np.any(flagged):
            logger.warning(f"{int(flagged.sum())} of {P} trajectories produced non-finite states")

        return PathBatch(
            indices=indices,
            times=np.asarray(times),
            initial=x0,
            prelimit=np.stack(pre_rec, axis=1) if self.prelimit else None,
            limits={name: np.stack(rec, axis=1) for name, rec in lim_rec.items()},
            sup_distance=sup,
            flagged=flagged,
            velocity=np.stack(v_rec, axis=1) if self.record_state else None,
            ou_state=np.stack(z_rec, axis=1) if self.record_state else None,
        )


@dataclass(frozen=True, eq=False)
class CoupledRun:
    prelimit: Trajectory
    limit: Trajectory
    sup_distance: float


def run_coupled(config: SimConfig, model: CoefficientModel, noise: NoiseSpec) -> CoupledRun:
    """Simulate trajectory ``config.trajectory_index`` and its limit on one Brownian path.

    Raises:
        BlowUpError: If either path produced a non-finite state.
    """
    simulator = CoupledSimulator(config, model, noise, record_every=1, record_state=True)
    batch = simulator.run([config.trajectory_index])
    name = simulator.limits[0].name
    if batch.flagged[0]:
        raise BlowUpError("non-finite state", config.trajectory_index)
    prelimit = Trajectory(batch.times, batch.prelimit[0], batch.velocity[0], batch.ou_state[0])
    limit = Trajectory(batch.times, batch.limits[name][0])
    return CoupledRun(prelimit, limit, float(batch.sup_distance[name][0]))
