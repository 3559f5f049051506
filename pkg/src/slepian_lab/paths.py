"""Seeded random streams and Brownian paths on uniform grids."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DT = 2.0**-10
# Largest relative mismatch accepted when snapping 1/dt to an integer.
ALIGN_TOL = 1e-3


@dataclass(frozen=True)
class SeedSpec:
    """A reproducible random stream: ``(master_seed, stream_index)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys and
    drive a counter-based Philox generator, so distinct indices give
    independent streams and no stream depends on how work is scheduled.
    ``substream`` addresses nested streams (e.g. blocks inside a replicate).
    """

    master_seed: int
    stream_index: int = 0
    substream: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        if self.stream_index < 0 or any(s < 0 for s in self.substream):
            raise ValueError("stream indices must be nonnegative")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_index, *self.substream)
        )
        return np.random.Generator(np.random.Philox(seq))

    def child(self, index: int) -> SeedSpec:
        return SeedSpec(self.master_seed, self.stream_index, (*self.substream, index))


def as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(int(seed))


@dataclass(frozen=True)
class GridPath:
    """Path values at ``t0, t0 + dt, ...``; the value array is read-only."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("values must be a nonempty 1-d sequence")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("path values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.size

    @property
    def duration(self) -> float:
        return (self.values.size - 1) * self.dt

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def at(self, t):
        """Linear interpolation of the path at time(s) ``t``."""
        return np.interp(t, self.times(), self.values)


def steps_per_unit(dt: float) -> int:
    """Number of grid steps in one time unit; ``1/dt`` must be an integer."""
    if not 0 < dt < 1:
        raise ValueError(f"dt must lie in (0, 1), got {dt}")
    n = round(1.0 / dt)
    if abs(n * dt - 1.0) > ALIGN_TOL:
        raise ValueError(f"1/dt must be an integer (got 1/dt = {1.0 / dt:.6g})")
    return int(n)


def sample_standard_normals(seed: SeedSpec, count: int) -> np.ndarray:
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    return as_seed(seed).rng().standard_normal(count)


def brownian_rows(rng: np.random.Generator, rows: int, steps: int, dt: float) -> np.ndarray:
    """``rows`` Brownian paths on ``steps`` grid steps of size ``dt``, B_0 = 0."""
    out = np.zeros((rows, steps + 1))
    inc = rng.standard_normal((rows, steps))
    inc *= math.sqrt(dt)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def bridge_rows(rng: np.random.Generator, rows: int, steps: int) -> np.ndarray:
    """Standard Brownian bridges on [0, 1] as ``B_u - u B_1`` from fresh paths."""
    b = brownian_rows(rng, rows, steps, 1.0 / steps)
    u = np.arange(steps + 1) / steps
    b -= u * b[:, -1:]
    b[:, -1] = 0.0
    return b


def sample_brownian_grid(seed: SeedSpec, horizon: float, dt: float) -> GridPath:
    if not (horizon > 0 and dt > 0):
        raise ValueError("horizon and dt must be positive")
    if horizon < dt * (1 - 1e-12):
        raise ValueError("horizon must be at least one step")
    steps = max(1, int(math.floor(horizon / dt + 1e-9)))
    values = brownian_rows(as_seed(seed).rng(), 1, steps, dt)[0]
    return GridPath(0.0, dt, values)


def sample_bridge_grid(seed: SeedSpec, dt: float) -> GridPath:
    if dt >= 1:
        raise ValueError(f"dt must be below 1, got {dt}")
    n = steps_per_unit(dt)
    return GridPath(0.0, 1.0 / n, bridge_rows(as_seed(seed).rng(), 1, n)[0])


def thread_count(threads: int | None = None) -> int:
    env = os.environ.get("SLEPIAN_LAB_THREADS")
    if env:
        return max(1, int(env))
    return max(1, threads or 1)


def map_blocks(func, seed: SeedSpec, replicates: int, block_size: int, threads=None):
    """Apply ``func(seed.child(b), size_b)`` to consecutive replicate blocks.

    Block ``b`` always covers the same replicates and owns the same stream, so
    the concatenated results do not depend on the thread count.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    seed = as_seed(seed)
    sizes = [block_size] * (replicates // block_size)
    if replicates % block_size:
        sizes.append(replicates % block_size)
    jobs = [(seed.child(b), size) for b, size in enumerate(sizes)]
    return run_parallel(func, jobs, threads)


def run_parallel(func, jobs, threads=None):
    """``[func(*job) for job in jobs]``, optionally on a thread pool."""
    nthreads = thread_count(threads)
    if nthreads == 1 or len(jobs) <= 1:
        return [func(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(lambda job: func(*job), jobs))
