"""Trajectory-indexed random streams.

Every trajectory owns private generators derived from (master seed, stream
tag, trajectory index), so results never depend on how trajectories are
grouped or scheduled.

A stream may be refined: with ``refine = r`` every base step of length
``2^r dt`` is split into 2^r fine steps by Brownian-bridge bisection. The
base increments are drawn from the same normals as an unrefined stream on
the base grid, so a run at dt / 2 sees the same Brownian path as a run at dt.
"""

import math

import numpy as np

STREAM_TAGS = {
    "increments": 0,
    "initial": 1,
    "frozen": 2,
    "auxiliary": 3,
}

# Normals are drawn in blocks of this many base steps
BLOCK_STEPS = 1024


def stream_generator(master_seed: int, trajectory_index: int, tag: str = "increments") -> np.random.Generator:
    seed_seq = np.random.SeedSequence(
        int(master_seed), spawn_key=(STREAM_TAGS[tag], int(trajectory_index))
    )
    return np.random.Generator(np.random.PCG64(seed_seq))


def refine_increments(dW: np.ndarray, normals: np.ndarray, h: float, levels: int) -> np.ndarray:
    """Split increments over a step of length h into 2^levels bridge pieces.

    Args:
        dW (np.ndarray): Increments, shape (..., m).
        normals (np.ndarray): Standard normals, shape (..., 2^levels - 1, m).
        h (float): Length of the step dW spans.
        levels (int): Number of bisections.

    Returns:
        np.ndarray: Chronological fine increments, shape (..., 2^levels, m).
    """
    pieces = dW[..., None, :]
    used = 0
    for _ in range(levels):
        count = pieces.shape[-2]
        zeta = normals[..., used : used + count, :]
        used += count
        left = 0.5 * pieces + 0.5 * math.sqrt(h) * zeta
        right = pieces - left
        pieces = np.stack([left, right], axis=-2).reshape(*pieces.shape[:-2], 2 * count, -1)
        h *= 0.5
    return pieces


class BrownianStream:
    """Gaussian draws for one trajectory.

    Each base step consumes one row of normals laid out as
    ``[m base | m (2^r - 1) bridge | extra 2^r innovation]``.

    Args:
        master_seed (int): Run seed.
        trajectory_index (int): Index of the trajectory within the ensemble.
        m (int): Brownian dimension.
        dt (float): Fine step.
        extra (int): Additional normals per fine step (OU innovations).
        refine (int): Bisection levels between the base and the fine grid.
    """

    def __init__(
        self, master_seed: int, trajectory_index: int, m: int, dt: float, extra: int = 0, refine: int = 0
    ):
        self.master_seed = int(master_seed)
        self.trajectory_index = int(trajectory_index)
        self.m = m
        self.extra = extra
        self.refine = refine
        self.substeps = 2**refine
        self.dt = dt
        self.base_dt = dt * self.substeps
        self.row_width = (m + extra) * self.substeps
        self.generator = stream_generator(master_seed, trajectory_index)
        self.auxiliary = stream_generator(master_seed, trajectory_index, "auxiliary")

    def block(self, steps: int = BLOCK_STEPS) -> np.ndarray:
        """Raw normals for the next ``steps`` base steps, shape (steps, row_width).

        Base normals and the remaining columns come from separate streams, so
        the base increments do not depend on ``refine`` or ``extra``.
        """
        base = self.generator.standard_normal((steps, self.m))
        if self.row_width == self.m:
            return base
        rest = self.auxiliary.standard_normal((steps, self.row_width - self.m))
        return np.concatenate([base, rest], axis=1)

    def split(self, rows: np.ndarray):
        """Turn raw rows into fine increments and innovations.

        Returns:
            tuple: ``(dW, innovation)`` with shapes (..., substeps, m) and
            (..., substeps, extra).
        """
        m, s = self.m, self.substeps
        base = math.sqrt(self.base_dt) * rows[..., :m]
        bridge = rows[..., m : m * s].reshape(*rows.shape[:-1], s - 1, m)
        innovation = rows[..., m * s :].reshape(*rows.shape[:-1], s, self.extra)
        return refine_increments(base, bridge, self.base_dt, self.refine), innovation


class StreamBatch:
    """Fine-step draws for a group of trajectories, stacked along axis 0."""

    def __init__(self, streams):
        self.streams = list(streams)
        self._dW = None
        self._innovation = None
        self._cursor = 0

    def next(self):
        """Increments (P, m) and innovations (P, extra) for one fine step."""
        if self._dW is None or self._cursor == self._dW.shape[0]:
            rows = np.stack([s.block(BLOCK_STEPS) for s in self.streams], axis=1)
            dW, innovation = self.streams[0].split(rows)
            # (blocks, P, substeps, .) -> (blocks * substeps, P, .)
            self._dW = np.swapaxes(dW, 1, 2).reshape(-1, len(self.streams), dW.shape[-1])
            self._innovation = np.swapaxes(innovation, 1, 2).reshape(
                -1, len(self.streams), innovation.shape[-1]
            )
            self._cursor = 0
        k = self._cursor
        self._cursor += 1
        return self._dW[k], self._innovation[k]
