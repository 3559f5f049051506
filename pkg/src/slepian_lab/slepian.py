"""The Slepian process S_t = B_{t+1} - B_t, its zeros, and related samplers.

Grid values of S are exact.  Between grid points S is a Brownian bridge with
variance 2 per unit time, independently across cells, which the Monte Carlo
samplers exploit to detect zeros between grid points and to draw the first
and last zero inside a cell from their exact conditional laws
(``detection="bridge"``).  ``detection="linear"`` instead brackets sign changes
and interpolates linearly, like :func:`first_zero`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .paths import GridPath, SeedSpec, as_seed, brownian_rows, bridge_rows, map_blocks, run_parallel, steps_per_unit

S_VAR = 2.0  # quadratic variation of S per unit time
BLOCK_ROWS = 1024
DEFAULT_CAP = 64


@dataclass(frozen=True)
class ZeroCrossing:
    time: float
    left_index: int


@dataclass(frozen=True)
class Quadruple:
    s0: float
    s1: float
    f: float
    g: float

    def __post_init__(self):
        if not 0 < self.f <= self.g < 1:
            raise ValueError(f"need 0 < f <= g < 1, got f={self.f}, g={self.g}")


# --- constructions ---


def slepian_from_bm(bm: GridPath) -> GridPath:
    """S_t = B_{t+1} - B_t on the grid of ``bm``."""
    k = steps_per_unit(bm.dt)
    if len(bm) < k + 2:
        raise ValueError("Brownian path must cover at least 1 + dt")
    return GridPath(bm.t0, bm.dt, bm.values[k:] - bm.values[:-k])


def slepian_rows(rng, rows: int, n_per_unit: int, horizon: int) -> np.ndarray:
    """``rows`` Slepian paths on [0, horizon] built from Brownian grids."""
    b = brownian_rows(rng, rows, (horizon + 1) * n_per_unit, 1.0 / n_per_unit)
    return b[:, n_per_unit:] - b[:, :-n_per_unit]


def slepian_bridge_rows(rng, rows: int, n_per_unit: int, horizon: int) -> np.ndarray:
    """Slepian paths from i.i.d. bridges and normals at the integer times."""
    z = rng.standard_normal((rows, horizon + 1))
    bridges = np.stack([bridge_rows(rng, rows, n_per_unit) for _ in range(horizon + 1)], axis=1)
    u = np.arange(n_per_unit) / n_per_unit
    out = np.empty((rows, horizon * n_per_unit + 1))
    for n in range(horizon):
        seg = bridges[:, n + 1, :-1] - bridges[:, n, :-1]
        seg += (1 - u) * z[:, n : n + 1] + u * z[:, n + 1 : n + 2]
        out[:, n * n_per_unit : (n + 1) * n_per_unit] = seg
    out[:, -1] = z[:, horizon]
    return out


def slepian_from_bridges(seed: SeedSpec, horizon: int, dt: float) -> GridPath:
    """Slepian path on [0, horizon] glued from bridges; exact at integer times."""
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon}")
    n = steps_per_unit(dt)
    vals = slepian_bridge_rows(as_seed(seed).rng(), 1, n, int(horizon))[0]
    return GridPath(0.0, 1.0 / n, vals)


# --- deterministic zero finders on a single path ---


def _cross_time(path, k):
    x, y = path.values[k], path.values[k + 1]
    frac = 0.0 if x == 0 else x / (x - y)
    return path.t0 + (k + frac) * path.dt


def first_zero(path: GridPath) -> ZeroCrossing | None:
    """First sign change (or grid zero), linearly interpolated."""
    v = path.values
    if v.size == 1:
        return ZeroCrossing(path.t0, 0) if v[0] == 0 else None
    hit = np.flatnonzero(v[:-1] * v[1:] <= 0)
    if hit.size == 0:
        return None
    k = int(hit[0])
    return ZeroCrossing(_cross_time(path, k), k)


def last_zero_before(path: GridPath, t: float) -> ZeroCrossing | None:
    """Last sign change at or before ``t``, linearly interpolated."""
    if not path.t0 <= t <= path.t_end + 1e-12 * max(1.0, abs(path.t_end)):
        raise ValueError(f"t={t} outside [{path.t0}, {path.t_end}]")
    v = path.values
    m = int(math.floor((t - path.t0) / path.dt + 1e-9))
    m = min(m, v.size - 1)
    if v[m] == 0:
        return ZeroCrossing(path.t0 + m * path.dt, max(m - 1, 0))
    hit = np.flatnonzero(v[:m] * v[1 : m + 1] <= 0)
    best = None
    if hit.size:
        k = int(hit[-1])
        best = ZeroCrossing(_cross_time(path, k), k)
    # a partial cell past the last grid point below t
    if m + 1 < v.size and t > path.t0 + m * path.dt and v[m] * v[m + 1] < 0:
        cand = _cross_time(path, m)
        if cand <= t:
            best = ZeroCrossing(cand, m)
    return best


# --- exact zero detection inside grid cells ---


def _hit_draws(rng, shape, detection):
    if detection == "bridge":
        return rng.standard_exponential(shape)
    if detection == "linear":
        return np.zeros(shape)
    raise ValueError(f"unknown detection {detection!r}")


def crossing_cells(rng, s, dt, detection="bridge"):
    """First and last grid cell of each row of ``s`` that contains a zero."""
    expo = _hit_draws(rng, (s.shape[0], s.shape[1] - 1), detection)
    return kernels.crossing_cells(np.ascontiguousarray(s), expo, 2.0 / (S_VAR * dt))


def first_hit_offset(rng, x, y, h, var=S_VAR):
    """Time to the first zero of a Brownian bridge from x to y over ``h``.

    Conditioned on the bridge touching zero.  After the time change
    t -> t/(h - t) the bridge becomes a Brownian motion with drift, whose
    hitting time of zero is inverse Gaussian, or Levy when y = 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax, ay = np.abs(x), np.abs(y)
    lam = x * x / (var * h)
    z = rng.standard_normal(x.shape)
    mean = np.where((ay > 0) & (ax > 0), ax / np.where(ay > 0, ay, 1.0), 1.0)
    w = rng.wald(mean, np.where(lam > 0, lam, 1.0))
    with np.errstate(divide="ignore"):
        u = np.where(ay > 0, w, lam / (z * z))
        tau = h / (1.0 + 1.0 / u)
    return np.where(ax > 0, tau, 0.0)


def _linear_offset(x, y, h):
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(x == 0, 0.0, x / (x - y))
    return h * np.clip(frac, 0.0, 1.0)


def zero_offsets(rng, s, cells, dt, detection="bridge", last=False):
    """Offset within each cell of its first (or, with ``last``, final) zero."""
    rows = np.arange(s.shape[0])
    x = s[rows, cells]
    y = s[rows, cells + 1]
    if detection == "linear":
        return _linear_offset(x, y, dt)
    if last:
        return dt - first_hit_offset(rng, y, x, dt)
    return first_hit_offset(rng, x, y, dt)


def first_last_zeros(rng, s, dt, detection="bridge"):
    """(F, G) on the span of each row, NaN where the row has no zero."""
    first, last = crossing_cells(rng, s, dt, detection)
    ok = first >= 0
    f = np.full(s.shape[0], np.nan)
    g = np.full(s.shape[0], np.nan)
    if not ok.any():
        return f, g, first, last
    sub = s[ok]
    fc, lc = first[ok], last[ok]
    tf = zero_offsets(rng, sub, fc, dt, detection)
    if detection == "linear":
        tg = zero_offsets(rng, sub, lc, dt, detection)
    else:
        rows = np.arange(sub.shape[0])
        # distinct cells: last zero from the reversed bridge; same cell: last
        # zero of the bridge from 0 (at F) to y over the remaining time
        tg_other = dt - first_hit_offset(rng, sub[rows, lc + 1], sub[rows, lc], dt)
        rest = dt - tf
        y = sub[rows, fc + 1]
        back = first_hit_offset(rng, y, np.zeros_like(y), np.where(rest > 0, rest, 1.0))
        tg_same = np.where(rest > 0, dt - back, tf)
        tg = np.where(fc == lc, np.maximum(tg_same, tf), tg_other)
    f[ok] = fc * dt + tf
    g[ok] = lc * dt + tg
    return f, g, first, last


# --- batch Monte Carlo ---


def _first_passage_block(seed, rows, n, horizon, detection):
    rng = seed.rng()
    s = slepian_rows(rng, rows, n, horizon)
    f, _, _, _ = first_last_zeros(rng, s, 1.0 / n, detection)
    return np.where(np.isnan(f), np.inf, f)


def sample_first_passage(seed, count, dt, horizon=1, detection="bridge", threads=None):
    """First zero F of ``count`` Slepian paths on [0, horizon]; inf if none."""
    n = steps_per_unit(dt)
    parts = map_blocks(
        lambda sd, k: _first_passage_block(sd, k, n, horizon, detection),
        seed, count, BLOCK_ROWS, threads,
    )
    return np.concatenate(parts)


def _quadruple_block(seed, rows, n, detection):
    rng = seed.rng()
    dt = 1.0 / n
    s = slepian_rows(rng, rows, n, 1)
    f, g, first, last = first_last_zeros(rng, s, dt, detection)
    acc = ~np.isnan(f) & (f > 0) & (g < 1)
    if detection == "linear":
        acc &= first != last  # a single bracketed crossing gives F = G
    acc &= f < g
    idx = np.flatnonzero(acc)
    s, f, g, last = s[idx], f[idx], g[idx], last[idx]
    rows_ = np.arange(idx.size)
    # standardized middle-piece value at the grid point nearest (F + G) / 2
    m = np.rint(0.5 * (f + g) / dt).astype(np.int64)
    tm = m * dt
    inside = (tm > f) & (tm < g)
    var = np.where(inside, S_VAR * (tm - f) * (g - tm) / np.where(inside, g - f, 1.0), 1.0)
    mid = np.where(inside, s[rows_, np.clip(m, 0, n)] / np.sqrt(var), np.nan)
    # after G the path keeps the sign of S_1 at every later grid point
    after = np.arange(n + 1)[None, :] > last[:, None]
    tail_ok = np.all(~after | (s * np.sign(s[:, -1:]) > 0), axis=1)
    return {
        "s0": s[:, 0], "s1": s[:, -1], "f": f, "g": g,
        "mid": mid, "tail_ok": tail_ok, "trials": rows,
    }


def sample_quadruples(seed, count, dt, detection="bridge", threads=None):
    """``count`` accepted quadruples (S0, S1, F, G) on {0 < F < G < 1}.

    Trials run in fixed-size blocks with their own streams, in rounds sized by
    the expected acceptance rate; the first ``count`` accepted draws in block
    order are kept, so the output does not depend on scheduling.
    """
    n = steps_per_unit(dt)
    seed = as_seed(seed)
    parts, accepted, nblocks = [], 0, 0
    while accepted < count:
        need = count - accepted
        blocks = max(1, math.ceil(1.3 * need / 0.8 / BLOCK_ROWS))
        jobs = [(seed.child(nblocks + i), BLOCK_ROWS, n, detection) for i in range(blocks)]
        res = run_parallel(_quadruple_block, jobs, threads)
        nblocks += blocks
        for r in res:
            parts.append(r)
            accepted += r["f"].size
    out = {k: np.concatenate([p[k] for p in parts])[:count] for k in ("s0", "s1", "f", "g", "mid", "tail_ok")}
    # trials needed to reach the count, for the acceptance rate
    sizes = np.cumsum([p["f"].size for p in parts])
    used = int(np.searchsorted(sizes, count)) + 1
    out["trials"] = sum(p["trials"] for p in parts[:used])
    out["accepted_in_trials"] = int(sizes[used - 1])
    return out


def sample_quadruple(seed: SeedSpec, dt: float, detection="bridge") -> Quadruple | None:
    """One trial: a Quadruple, or None when the path is rejected."""
    r = _quadruple_block(as_seed(seed), 1, steps_per_unit(dt), detection)
    if r["f"].size == 0:
        return None
    return Quadruple(float(r["s0"][0]), float(r["s1"][0]), float(r["f"][0]), float(r["g"][0]))


# --- bridge-like window ---


def _bridge_like_block(rng, rows, n, cap, detection, u_points=None, keep_full=False):
    """Windows B_{F+u} - B_F, with F located in unit chunks up to ``cap``."""
    dt = 1.0 / n
    seg = brownian_rows(rng, rows, 2 * n, dt)
    active = np.arange(rows)
    f = np.full(rows, np.inf)
    max_abs = np.full(rows, np.nan)
    endpoint = np.full(rows, np.nan)
    at_u = None if u_points is None else np.full((rows, len(u_points)), np.nan)
    full = np.full((rows, n + 1), np.nan) if keep_full else None
    grid_u = np.arange(n + 1) * dt
    for unit in range(cap):
        s = seg[:, n:] - seg[:, : n + 1]
        first, _ = crossing_cells(rng, s, dt, detection)
        hit = first >= 0
        if hit.any():
            sub, cells = s[hit], first[hit]
            tau = zero_offsets(rng, sub, cells, dt, detection)
            fh = unit + cells * dt + tau
            j = np.minimum(np.rint(cells + tau / dt).astype(np.int64), n)
            rid = active[hit]
            f[rid] = fh
            cols = j[:, None] + np.arange(n + 1)[None, :]
            bh = seg[hit]
            win = np.take_along_axis(bh, cols, axis=1) - bh[np.arange(cols.shape[0]), j][:, None]
            max_abs[rid] = np.abs(win).max(axis=1)
            endpoint[rid] = win[:, -1]
            if at_u is not None:
                at_u[rid] = np.array([np.interp(u_points, grid_u, w) for w in win])
            if keep_full:
                full[rid] = win
        active = active[~hit]
        seg = seg[~hit]
        if active.size == 0 or unit + 1 == cap:
            break
        ext = brownian_rows(rng, active.size, n, dt) + seg[:, -1:]
        seg = np.concatenate([seg[:, n:], ext[:, 1:]], axis=1)
    out = {"f": f, "max_abs": max_abs, "endpoint": endpoint}
    if at_u is not None:
        out["at_u"] = at_u
    if keep_full:
        out["window"] = full
    return out


def sample_bridge_like_window(seed: SeedSpec, dt: float, horizon_cap: int = DEFAULT_CAP,
                              detection="bridge") -> GridPath | None:
    """The window (B_{F+u} - B_F; 0 <= u <= 1) after the first zero F of S."""
    if horizon_cap < 2:
        raise ValueError("horizon_cap must be at least 2")
    n = steps_per_unit(dt)
    r = _bridge_like_block(as_seed(seed).rng(), 1, n, int(horizon_cap), detection, keep_full=True)
    if not np.isfinite(r["f"][0]):
        return None
    return GridPath(0.0, 1.0 / n, r["window"][0])


def sample_bridge_like_maxima(seed, count, dt, horizon_cap=DEFAULT_CAP, detection="bridge",
                              u_points=None, threads=None):
    """Batch summaries of bridge-like windows: F, max |window|, endpoint."""
    if horizon_cap < 2:
        raise ValueError("horizon_cap must be at least 2")
    n = steps_per_unit(dt)
    parts = map_blocks(
        lambda sd, k: _bridge_like_block(sd.rng(), k, n, int(horizon_cap), detection, u_points),
        seed, count, BLOCK_ROWS // 4, threads,
    )
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
