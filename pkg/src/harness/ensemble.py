"""Path-level parallelism with fixed chunking.

Chunk boundaries depend only on the number of paths and the chunk size, and
every trajectory draws from its own indexed stream, so the worker count never
changes a result.
"""

import logging
from functools import partial
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from ..common.config import CHUNK_SIZE, WORKERS
from ..common.errors import ConfigError
from ..sde.coupled import CoupledSimulator, PathBatch, SimConfig

logger = logging.getLogger(__name__)


@dataclass
class EnsembleSpec:
    """Ensemble size, base configuration and an optional sweep.

    Attributes:
        n_paths (int): Trajectories per sweep point, at least 2.
        config (SimConfig): Base configuration.
        sweep (List[float]): Positive, strictly monotone sweep values.
        burn_in (float): Discarded initial time, where applicable.
    """

    n_paths: int
    config: SimConfig
    sweep: List[float] = field(default_factory=list)
    burn_in: float = 0.0

    def validate(self):
        if self.n_paths < 2:
            raise ConfigError(f"need at least 2 paths, got {self.n_paths}", "n_paths")
        values = np.asarray(self.sweep, dtype=float)
        if values.size and np.any(values <= 0.0):
            raise ConfigError("sweep values must be positive", "sweep")
        if values.size > 1:
            steps = np.diff(values)
            if not (np.all(steps < 0.0) or np.all(steps > 0.0)):
                raise ConfigError("sweep values must be strictly sorted", "sweep")
        if self.burn_in < 0.0:
            raise ConfigError("burn-in must be nonnegative", "burn_in")


def chunk_indices(n_paths: int, chunk_size: Optional[int] = None, first_index: int = 0) -> List[np.ndarray]:
    size = chunk_size or CHUNK_SIZE
    if size < 1:
        raise ConfigError(f"chunk size must be positive, got {size}", "chunk_size")
    return [
        np.arange(start, min(start + size, n_paths)) + first_index
        for start in range(0, n_paths, size)
    ]


def parallel_map(func: Callable, items: Sequence, workers: Optional[int] = None) -> list:
    """Apply ``func`` to every item, in order, with joblib when workers > 1."""
    workers = workers or WORKERS
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=workers)(delayed(func)(item) for item in items)


def _run_chunk(simulator: CoupledSimulator, indices: np.ndarray) -> PathBatch:
    return simulator.run(indices)


def run_ensemble(
    simulator: CoupledSimulator,
    n_paths: int,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> PathBatch:
    """Simulate trajectories 0 .. n_paths - 1 and stack them in index order."""
    chunks = chunk_indices(n_paths, chunk_size)
    logger.debug(f"Running {n_paths} paths in {len(chunks)} chunks")
    batches = parallel_map(partial(_run_chunk, simulator), chunks, workers)
    return PathBatch.concatenate(batches)
