"""Local time of the moving window at the bridge set, and the bridge embedding.

The window X_t = (B_{t+u} - B_t; 0 <= u <= 1) is a bridge path exactly when
S_t = 0.  Its local time is approximated by

    Gamma_eps[0, t] = sqrt(pi/2) / eps * Leb{u <= t : |S_u| <= eps},

a Riemann sum on the grid.  The allocation time T is the first t > 0 at which
Gamma_eps[0, t] catches up with t; the window X_T is then a standard Brownian
bridge in the limit of small eps and dt.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .paths import GridPath, SeedSpec, as_seed, brownian_rows, map_blocks, steps_per_unit

GAMMA_SCALE = math.sqrt(math.pi / 2)
FLOOR_FACTOR = 4.0
DEFAULT_FACTOR = 8.0
DEFAULT_CAP = 64
N_SUBSAMPLE = 17


def epsilon_floor(dt: float) -> float:
    return FLOOR_FACTOR * math.sqrt(dt)


def default_epsilon(dt: float) -> float:
    return DEFAULT_FACTOR * math.sqrt(dt)


def _check_epsilon(epsilon, dt):
    floor = epsilon_floor(dt)
    if not epsilon >= floor * (1 - 1e-12):
        raise ValueError(f"epsilon={epsilon:.6g} is below the floor 4*sqrt(dt)={floor:.6g}")
    if epsilon >= GAMMA_SCALE:
        raise ValueError("epsilon must be below sqrt(pi/2)")


@dataclass(frozen=True)
class LocalTimeProfile:
    """Cumulative Gamma_eps[0, t] at the grid times t0 + i * dt."""

    dt: float
    epsilon: float
    cumulative: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        c = np.array(self.cumulative, dtype=float)
        if c.ndim != 1 or c.size == 0 or c[0] != 0:
            raise ValueError("cumulative must be a nonempty sequence starting at 0")
        if np.any(np.diff(c) < 0):
            raise ValueError("cumulative must be nondecreasing")
        c.flags.writeable = False
        object.__setattr__(self, "cumulative", c)

    @property
    def grid(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.cumulative.size)


def local_time_profile(slepian: GridPath, epsilon: float) -> LocalTimeProfile:
    _check_epsilon(epsilon, slepian.dt)
    inband = np.abs(slepian.values[:-1]) <= epsilon
    cum = np.concatenate([[0.0], np.cumsum(inband) * (GAMMA_SCALE / epsilon * slepian.dt)])
    return LocalTimeProfile(slepian.dt, epsilon, cum, slepian.t0)


@dataclass(frozen=True)
class AllocationTime:
    time: float
    cell: int  # crossing happens inside [cell, cell + 1] in grid units
    degenerate: bool  # the path starts inside the band, so T < dt


def allocation_time(profile: LocalTimeProfile) -> AllocationTime | None:
    """First t > 0 with Gamma[0, t] >= t, interpolated inside its grid cell."""
    c = profile.cumulative
    i = np.arange(c.size)
    excess = c - i * profile.dt
    hit = np.flatnonzero(excess[1:] >= -1e-15 * np.maximum(i[1:], 1) * profile.dt)
    if hit.size == 0:
        return None
    k = int(hit[0])  # crossing inside cell [k, k + 1]
    lo, hi = excess[k], excess[k + 1]
    frac = 0.0 if hi == lo else min(max(-lo / (hi - lo), 0.0), 1.0)
    t = profile.t0 + (k + frac) * profile.dt
    return AllocationTime(t, k, k == 0)


@dataclass(frozen=True)
class EmbeddingResult:
    t_alloc: float
    window: GridPath
    endpoint: float
    horizon_used: int
    degenerate: bool

    def __post_init__(self):
        if self.window.values[0] != 0:
            raise ValueError("window must start at 0")
        if self.t_alloc < 0 or (self.t_alloc == 0 and not self.degenerate):
            raise ValueError("t_alloc must be positive unless flagged degenerate")


def _embed_block(rng, rows, n, epsilon, cap, u_points=None, keep_full=False):
    """Allocation times and windows for ``rows`` independent Brownian paths.

    Each unit of time scans S on [k, k + 1) (needs B up to k + 2); the
    in-band count is kept as an integer so the crossing test is exact.
    """
    dt = 1.0 / n
    weight = GAMMA_SCALE / epsilon
    seg = brownian_rows(rng, rows, 2 * n, dt)
    active = np.arange(rows)
    count = np.zeros(rows, dtype=np.int64)
    t_alloc = np.full(rows, np.nan)
    endpoint = np.full(rows, np.nan)
    degenerate = np.zeros(rows, dtype=bool)
    units = np.zeros(rows, dtype=np.int64)
    at_u = None if u_points is None else np.full((rows, len(u_points)), np.nan)
    full = np.full((rows, n + 1), np.nan) if keep_full else None
    grid_u = np.arange(n + 1) * dt
    for unit in range(cap):
        s = np.ascontiguousarray(seg[:, n:2 * n] - seg[:, :n])
        j, cnt = kernels.band_catch_up(s, epsilon, weight, count[active], unit * n)
        hit = j >= 0
        if hit.any():
            rid = active[hit]
            jh = j[hit]
            gidx = unit * n + jh  # left end of the crossing cell, an in-band point
            k_before = cnt[hit] - 1
            # Gamma - t at the cell start, in grid units; slope inside is weight - 1
            lo = weight * k_before - gidx
            t_alloc[rid] = (gidx - np.minimum(lo, 0.0) / (weight - 1.0)) * dt
            t_alloc[rid] = np.where(gidx == 0, 0.0, t_alloc[rid])
            degenerate[rid] = gidx == 0
            units[rid] = unit + 1
            bh = seg[hit]
            cols = jh[:, None] + np.arange(n + 1)[None, :]
            win = np.take_along_axis(bh, cols, axis=1) - bh[np.arange(jh.size), jh][:, None]
            endpoint[rid] = win[:, -1]
            if at_u is not None:
                at_u[rid] = np.array([np.interp(u_points, grid_u, w) for w in win])
            if keep_full:
                full[rid] = win
        count[active] = cnt
        active = active[~hit]
        seg = seg[~hit]
        if active.size == 0:
            break
        units[active] = unit + 1
        if unit + 1 == cap:
            break
        ext = brownian_rows(rng, active.size, n, dt) + seg[:, -1:]
        seg = np.concatenate([seg[:, n:], ext[:, 1:]], axis=1)
    out = {"t_alloc": t_alloc, "endpoint": endpoint, "degenerate": degenerate, "units": units}
    if at_u is not None:
        out["at_u"] = at_u
    if keep_full:
        out["window"] = full
    return out


def embed_bridge(seed: SeedSpec, dt: float, epsilon: float | None = None,
                 horizon_cap: int = DEFAULT_CAP) -> EmbeddingResult | None:
    """Run B until Gamma catches up with the clock; return T and X_T.

    Returns None when no allocation happens before ``horizon_cap`` time units.
    """
    n = steps_per_unit(dt)
    dt = 1.0 / n
    epsilon = default_epsilon(dt) if epsilon is None else epsilon
    _check_epsilon(epsilon, dt)
    if horizon_cap < 4:
        raise ValueError("horizon_cap must be at least 4")
    r = _embed_block(as_seed(seed).rng(), 1, n, epsilon, int(horizon_cap), keep_full=True)
    if np.isnan(r["t_alloc"][0]):
        return None
    return EmbeddingResult(
        float(r["t_alloc"][0]), GridPath(0.0, dt, r["window"][0]),
        float(r["endpoint"][0]), int(r["units"][0]), bool(r["degenerate"][0]),
    )


def subsample_points(k: int = N_SUBSAMPLE) -> np.ndarray:
    return np.linspace(0.0, 1.0, k)


def sample_embeddings(seed, count, dt, epsilon=None, horizon_cap=DEFAULT_CAP,
                      u_points=None, threads=None):
    """Batch embeddings; ``t_alloc`` is NaN where the cap was reached."""
    n = steps_per_unit(dt)
    dt = 1.0 / n
    epsilon = default_epsilon(dt) if epsilon is None else epsilon
    _check_epsilon(epsilon, dt)
    if horizon_cap < 4:
        raise ValueError("horizon_cap must be at least 4")
    u_points = subsample_points() if u_points is None else np.asarray(u_points, dtype=float)
    parts = map_blocks(
        lambda sd, k: _embed_block(sd.rng(), k, n, epsilon, int(horizon_cap), u_points),
        seed, count, 256, threads,
    )
    out = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    out["u"] = u_points
    out["epsilon"] = epsilon
    return out


def _gamma_block(seed, rows, n, epsilon, horizon):
    rng = seed.rng()
    b = brownian_rows(rng, rows, (horizon + 1) * n, 1.0 / n)
    s = b[:, n : n + horizon * n] - b[:, : horizon * n]
    return np.count_nonzero(np.abs(s) <= epsilon, axis=1) * (GAMMA_SCALE / epsilon / n)


def sample_local_time_totals(seed, count, dt, epsilon=None, horizon=1, threads=None):
    """Gamma_eps[0, horizon] for ``count`` independent Slepian paths."""
    n = steps_per_unit(dt)
    epsilon = default_epsilon(1.0 / n) if epsilon is None else epsilon
    _check_epsilon(epsilon, 1.0 / n)
    parts = map_blocks(lambda sd, k: _gamma_block(sd, k, n, epsilon, int(horizon)),
                       seed, count, 256, threads)
    return np.concatenate(parts)


def expected_local_time(epsilon: float, horizon: float = 1.0) -> float:
    """E Gamma_eps[0, horizon] on a fine grid: sqrt(pi/2)/eps * P(|N(0,1)| <= eps)."""
    return horizon * GAMMA_SCALE / epsilon * math.erf(epsilon / math.sqrt(2.0))
