from .brownian import BrownianStream, StreamBatch, stream_generator
from .coupled import (
    CoupledRun,
    CoupledSimulator,
    LimitSpec,
    PathBatch,
    SimConfig,
    Trajectory,
    run_coupled,
)
from .frozen import FrozenTrajectory, simulate_frozen_fast
from .integrators import InertialState, inertial_step, limit_step, transport_split_step
from .ou import OUTransition, ou_step

__all__ = [
    "BrownianStream",
    "CoupledRun",
    "CoupledSimulator",
    "FrozenTrajectory",
    "InertialState",
    "LimitSpec",
    "OUTransition",
    "PathBatch",
    "SimConfig",
    "StreamBatch",
    "Trajectory",
    "inertial_step",
    "limit_step",
    "ou_step",
    "run_coupled",
    "simulate_frozen_fast",
    "stream_generator",
    "transport_split_step",
]
