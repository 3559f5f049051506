"""First level bridges of a simple random walk.

For even n, F_n is the first k >= 0 with RW_{k+n} = RW_k and the bridge is the
window of n increments starting at F_n.  Its law comes from an absorbing
Markov chain on n-bit increment windows; large n is handled by simulation.

Windows are n-bit integers; bit 1 means an up step and the most significant
bit is the oldest step.  A step shifts the window left and appends a bit.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .paths import SeedSpec, as_seed, map_blocks
from .stats import binomial_estimate

try:
    from gmpy2 import mpq as _rational
except ImportError:  # pragma: no cover - exercised only without gmpy2
    _rational = Fraction

MAX_N = 16
# Exact rational elimination stays within seconds up to this size; larger
# windows are solved in floating point.
MAX_EXACT_N = 12
ITERATION_CAP = 10**9


@dataclass(frozen=True)
class LatticePath:
    increments: tuple[int, ...]

    def __post_init__(self):
        inc = tuple(int(i) for i in self.increments)
        if any(i not in (-1, 1) for i in inc):
            raise ValueError("increments must be +1 or -1")
        object.__setattr__(self, "increments", inc)

    def __len__(self):
        return len(self.increments)

    def cumsum(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.increments)])

    def __neg__(self):
        return LatticePath(tuple(-i for i in self.increments))

    def to_string(self) -> str:
        return "".join("+" if i > 0 else "-" for i in self.increments)

    @classmethod
    def from_string(cls, s: str) -> LatticePath:
        return cls(tuple(1 if c == "+" else -1 for c in s))


def window_to_path(w: int, n: int) -> LatticePath:
    return LatticePath(tuple(1 if (w >> (n - 1 - i)) & 1 else -1 for i in range(n)))


def path_to_window(path: LatticePath) -> int:
    w = 0
    for i in path.increments:
        w = (w << 1) | (i > 0)
    return w


@dataclass(frozen=True)
class BridgeLaw:
    """Law of the first level bridge of length n.

    ``probabilities`` maps each zero-sum path string to its mass, a Fraction
    when ``exact`` and a float otherwise.
    """

    n: int
    probabilities: dict
    exact: bool

    def __len__(self):
        return len(self.probabilities)

    def floats(self) -> dict:
        return {k: float(v) for k, v in self.probabilities.items()}

    def total(self):
        return sum(self.probabilities.values(), Fraction(0) if self.exact else 0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["path", "prob_num", "prob_den", "prob_float"])
        for path in sorted(self.probabilities, reverse=True):
            p = self.probabilities[path]
            if self.exact:
                wr.writerow([path, p.numerator, p.denominator, f"{float(p):.9g}"])
            else:
                wr.writerow([path, "", "", f"{p:.9g}"])
        return buf.getvalue()


def _check_n(n):
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even integer, got {n}")
    if n > MAX_N:
        raise NotImplementedError(f"n > {MAX_N} exceeds the state-space cap")


def _chain(n):
    """Positive-sum transient windows, their index, and the absorbing windows."""
    full = (1 << n) - 1
    sums = np.array([2 * bin(w).count("1") - n for w in range(1 << n)])
    pos = np.flatnonzero(sums > 0)
    return full, sums, pos


def _solve_exact(n):
    full, sums, pos = _chain(n)
    idx = {int(w): i for i, w in enumerate(pos)}
    m = len(pos)
    one, half = _rational(1), _rational(1, 2)
    # expected visits y: y_t - sum_{s -> t} y_s / 2 = 2^-n over positive windows
    rows = [{i: one} for i in range(m)]
    for i, w in enumerate(pos):
        for bit in (0, 1):
            t = ((int(w) << 1) & full) | bit
            if sums[t] > 0:
                r = rows[idx[t]]
                r[i] = r.get(i, 0) - half
    rhs = [_rational(1, 1 << n)] * m
    col_rows = {}
    for i, r in enumerate(rows):
        for j in r:
            col_rows.setdefault(j, set()).add(i)
    # sparse Gaussian elimination in natural window order
    for p in range(m):
        rp = rows[p]
        piv = rp[p]
        for i in sorted(col_rows[p]):
            if i <= p:
                continue
            ri = rows[i]
            fac = ri[p] / piv
            for j, v in rp.items():
                nv = ri.get(j, 0) - fac * v
                if nv == 0:
                    if j in ri:
                        del ri[j]
                        col_rows[j].discard(i)
                else:
                    if j not in ri:
                        col_rows.setdefault(j, set()).add(i)
                    ri[j] = nv
            rhs[i] -= fac * rhs[p]
    y = [None] * m
    for p in range(m - 1, -1, -1):
        rp = rows[p]
        s = rhs[p]
        for j, v in rp.items():
            if j != p:
                s -= v * y[j]
        y[p] = s / rp[p]
    return full, sums, pos, y


def _solve_float(n):
    from scipy.sparse import coo_matrix, identity
    from scipy.sparse.linalg import spsolve

    full, sums, pos = _chain(n)
    lookup = np.full(1 << n, -1)
    lookup[pos] = np.arange(pos.size)
    src, dst = [], []
    for bit in (0, 1):
        t = ((pos << 1) & full) | bit
        keep = sums[t] > 0
        src.append(np.flatnonzero(keep))
        dst.append(lookup[t[keep]])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    q = coo_matrix((np.full(src.size, 0.5), (dst, src)), shape=(pos.size, pos.size))
    a = (identity(pos.size, format="csc") - q.tocsc()).tocsc()
    y = spsolve(a, np.full(pos.size, 2.0**-n))
    return full, sums, pos, list(y)


def exact_bridge_law(n: int, exact: bool | None = None) -> BridgeLaw:
    """Law of the first level bridge from the absorbing window chain.

    Windows with positive and negative sums cannot reach each other without
    absorption, and the chain is symmetric under flipping all steps, so only
    the positive class is solved and the negative half is mirrored.  Rational
    arithmetic is used up to ``MAX_EXACT_N`` unless ``exact`` says otherwise.
    """
    _check_n(n)
    if exact is None:
        exact = n <= MAX_EXACT_N
    full, sums, pos, y = (_solve_exact if exact else _solve_float)(n)
    zero = [w for w in range(1 << n) if sums[w] == 0]
    base = Fraction(1, 1 << n) if exact else 2.0**-n
    mass = {w: base for w in zero}
    for i, w in enumerate(pos):
        share = y[i] / 2
        if exact:
            share = Fraction(int(share.numerator), int(share.denominator))
        for bit in (0, 1):
            t = ((int(w) << 1) & full) | bit
            if sums[t] == 0:
                mass[t] += share
                # mirrored transition from the negative class
                mass[t ^ full] += share
    probs = {window_to_path(w, n).to_string(): p for w, p in mass.items()}
    return BridgeLaw(n, probs, exact)


def max_min_ratio(law: BridgeLaw):
    vals = list(law.probabilities.values())
    return max(vals) / min(vals)


def expected_hitting_times(n: int) -> np.ndarray:
    """E[first j >= 1 with a zero-sum window | starting window w], all w.

    Independent of the absorption solve; by time reversal and Kac's lemma the
    bridge law is ``2^-n * E[tau | reversed path]``.
    """
    from scipy.sparse import coo_matrix, identity
    from scipy.sparse.linalg import spsolve

    _check_n(n)
    full, sums, _ = _chain(n)
    nz = np.flatnonzero(sums != 0)
    lookup = np.full(1 << n, -1)
    lookup[nz] = np.arange(nz.size)
    # h(w) = 1 + sum over non-absorbing successors of h / 2, for w nonzero-sum
    rows, cols = [], []
    for bit in (0, 1):
        t = ((nz << 1) & full) | bit
        keep = sums[t] != 0
        rows.append(np.flatnonzero(keep))
        cols.append(lookup[t[keep]])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    q = coo_matrix((np.full(rows.size, 0.5), (rows, cols)), shape=(nz.size, nz.size))
    h = spsolve((identity(nz.size, format="csc") - q.tocsc()).tocsc(), np.ones(nz.size))
    out = np.empty(1 << n)
    out[nz] = h
    zero = np.flatnonzero(sums == 0)
    for w in zero:
        acc = 0.0
        for bit in (0, 1):
            t = ((int(w) << 1) & full) | bit
            acc += 0.5 * (1.0 + (h[lookup[t]] if sums[t] != 0 else 0.0))
        out[w] = acc
    return out


# --- simulation ---


def simulate_first_level_bridge(seed: SeedSpec, n: int) -> LatticePath:
    """Run the walk until the window sum vanishes; return that window."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even integer, got {n}")
    rng = as_seed(seed).rng()
    chunk = max(4096, 4 * n)
    buf = list((rng.integers(0, 2, n, dtype=np.int8) * 2 - 1).tolist())
    window = list(buf)
    d = sum(window)
    head = 0  # window = buf[head: head + n]
    steps = 0
    while d != 0:
        if steps >= ITERATION_CAP:
            raise RuntimeError(f"no zero-sum window after {ITERATION_CAP} steps")
        if head + n >= len(buf):
            buf = buf[head:] + (rng.integers(0, 2, chunk, dtype=np.int8) * 2 - 1).tolist()
            head = 0
        d += buf[head + n] - buf[head]
        head += 1
        steps += 1
    return LatticePath(tuple(buf[head : head + n]))


def _random_steps(rng, rows, width):
    nbytes = (width + 7) // 8
    bits = np.unpackbits(rng.integers(0, 256, (rows, nbytes), dtype=np.uint8), axis=1)
    return (bits[:, :width].astype(np.int8) << 1) - 1


def _bridge_block(seed, rows, n, extra, want):
    """First level bridges for ``rows`` walks, summarized per ``want``."""
    rng = seed.rng()
    steps = _random_steps(rng, rows, n + extra)
    active = np.arange(rows)
    windows_out = np.zeros((rows, n), dtype=np.int8) if want == "windows" else None
    max_abs = np.full(rows, np.nan)
    scanned = 0
    while active.size:
        k = kernels.first_zero_windows(steps, n)
        hit = k >= 0
        if hit.any():
            cols = k[hit][:, None] + np.arange(n)[None, :]
            win = np.take_along_axis(steps[hit], cols, axis=1)
            if want == "windows":
                windows_out[active[hit]] = win
            else:
                cs = np.cumsum(win, axis=1, dtype=np.int32)
                max_abs[active[hit]] = np.abs(cs).max(axis=1)
        active = active[~hit]
        scanned += extra + 1
        if active.size == 0:
            break
        if scanned > ITERATION_CAP:
            raise RuntimeError(f"no zero-sum window after {ITERATION_CAP} steps")
        tail = steps[~hit, -n:]
        steps = np.concatenate([tail, _random_steps(rng, active.size, extra + 1)], axis=1)
    return windows_out if want == "windows" else max_abs


def sample_bridge_windows(seed, n, count, threads=None) -> np.ndarray:
    """``count`` first level bridges as int8 rows of increments."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even integer, got {n}")
    extra = max(64, 4 * n)
    rows = max(256, 2**20 // (n + extra))
    parts = map_blocks(lambda sd, k: _bridge_block(sd, k, n, extra, "windows"),
                       seed, count, rows, threads)
    return np.concatenate(parts)


def window_counts(windows: np.ndarray) -> dict:
    """Empirical law {path string: frequency} of bridge windows."""
    n = windows.shape[1]
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    codes = ((windows > 0).astype(np.int64) * weights).sum(axis=1)
    vals, cnt = np.unique(codes, return_counts=True)
    total = windows.shape[0]
    return {window_to_path(int(v), n).to_string(): c / total for v, c in zip(vals, cnt)}


def sample_scaled_maxima(seed, n, count, threads=None) -> np.ndarray:
    """max_k |bridge_k| / sqrt(n) for ``count`` first level bridges."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be a positive even integer, got {n}")
    extra = n
    rows = max(16, 2**22 // (2 * n))
    parts = map_blocks(lambda sd, k: _bridge_block(sd, k, n, extra, "max"),
                       seed, count, rows, threads)
    return np.concatenate(parts) / math.sqrt(n)


@dataclass(frozen=True)
class CdfEstimate:
    estimate: float
    stderr: float
    replicates: int


def scaled_max_cdf_at(seed, n, x, replicates, threads=None) -> CdfEstimate:
    """Monte Carlo P(max_k |bridge_k| / sqrt(n) <= x) with binomial error."""
    if replicates < 1000:
        raise ValueError("replicates must be at least 1000")
    m = sample_scaled_maxima(seed, n, replicates, threads)
    p, se = binomial_estimate(int(np.sum(m <= x)), replicates)
    return CdfEstimate(p, se, replicates)
