"""Hot inner loops, each with a numba and a pure-numpy implementation.

The numba versions are used when numba imports and ``SLEPIAN_LAB_NUMBA`` is not
set to ``0``.  Both versions consume identical inputs and return bit-identical
outputs (integer state, no transcendental functions), so the backend never
changes an experiment's result, only its runtime.
"""
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SLEPIAN_LAB_NUMBA", "1") != "0"


def _noop_njit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


njit = numba.njit if HAVE_NUMBA else _noop_njit


# --- zero-crossing cells of a sqrt(var)-Brownian-bridge-interpolated grid ---


def crossing_cells_numpy(values, expo, scale):
    """First and last grid cell containing a zero, per row.

    Cell k of row r holds a zero when the endpoint values have opposite signs
    (or touch zero), or when ``values[k] * values[k+1] * scale < expo[k]``.
    With ``scale = 2 / (var * dt)`` and ``expo`` standard exponential, the
    second test fires with probability ``exp(-2 x y / (var dt))``, which is the
    chance that a Brownian bridge with variance ``var`` per unit time between
    same-sign values x and y touches zero.
    """
    prod = values[:, :-1] * values[:, 1:]
    hit = (prod <= 0.0) | (prod * scale < expo)
    any_hit = hit.any(axis=1)
    first = np.where(any_hit, hit.argmax(axis=1), -1)
    ncell = hit.shape[1]
    last = np.where(any_hit, ncell - 1 - hit[:, ::-1].argmax(axis=1), -1)
    return first.astype(np.int64), last.astype(np.int64)


@njit(cache=True, nogil=True)
def crossing_cells_numba(values, expo, scale):
    m, npts = values.shape
    first = np.full(m, -1, dtype=np.int64)
    last = np.full(m, -1, dtype=np.int64)
    for r in range(m):
        for k in range(npts - 1):
            p = values[r, k] * values[r, k + 1]
            if p <= 0.0 or p * scale < expo[r, k]:
                first[r] = k
                break
        if first[r] < 0:
            continue
        for k in range(npts - 2, first[r] - 1, -1):
            p = values[r, k] * values[r, k + 1]
            if p <= 0.0 or p * scale < expo[r, k]:
                last[r] = k
                break
    return first, last


# --- lattice walk: first window of n steps with zero sum ---


def first_zero_windows_numpy(steps, n):
    """Index of the first length-``n`` window with zero sum in each row, or -1.

    ``steps`` is an int8 array of +/-1 with shape (rows, n + L); windows start
    at 0..L.
    """
    rows, width = steps.shape
    csum = np.zeros((rows, width + 1), dtype=np.int32)
    np.cumsum(steps, axis=1, dtype=np.int32, out=csum[:, 1:])
    zero = (csum[:, n:] - csum[:, : width + 1 - n]) == 0
    found = zero.any(axis=1)
    return np.where(found, zero.argmax(axis=1), -1).astype(np.int64)


@njit(cache=True, nogil=True)
def first_zero_windows_numba(steps, n):
    rows, width = steps.shape
    out = np.full(rows, -1, dtype=np.int64)
    for r in range(rows):
        d = 0
        for j in range(n):
            d += steps[r, j]
        if d == 0:
            out[r] = 0
            continue
        for k in range(1, width - n + 1):
            d += steps[r, k + n - 1] - steps[r, k - 1]
            if d == 0:
                out[r] = k
                break
    return out


# --- band occupation and the first time it catches up with the clock ---


def band_catch_up_numpy(values, eps, weight, count0, index0):
    """Scan one chunk of grid values per row for the allocation crossing.

    Column j of ``values`` is grid point ``index0 + j``; ``count0[r]`` in-band
    points precede the chunk in row r.  Returns ``(j, count)`` per row: ``j``
    is the first column with ``weight * count_through(j) >= index0 + j + 1``
    (-1 if none) and ``count`` is the in-band count through the scanned part.
    """
    inband = np.abs(values) <= eps
    counts = count0[:, None] + np.cumsum(inband, axis=1, dtype=np.int64)
    clock = index0 + 1 + np.arange(values.shape[1], dtype=np.int64)
    caught = weight * counts >= clock
    found = caught.any(axis=1)
    j = np.where(found, caught.argmax(axis=1), -1).astype(np.int64)
    rows = np.arange(values.shape[0])
    count = np.where(found, counts[rows, np.maximum(j, 0)], counts[:, -1]).astype(np.int64)
    return j, count


@njit(cache=True, nogil=True)
def band_catch_up_numba(values, eps, weight, count0, index0):
    rows, width = values.shape
    out_j = np.full(rows, -1, dtype=np.int64)
    out_c = np.empty(rows, dtype=np.int64)
    for r in range(rows):
        count = count0[r]
        for j in range(width):
            if abs(values[r, j]) <= eps:
                count += 1
            if weight * count >= index0 + j + 1:
                out_j[r] = j
                break
        out_c[r] = count
    return out_j, out_c


if USE_NUMBA:
    crossing_cells = crossing_cells_numba
    first_zero_windows = first_zero_windows_numba
    band_catch_up = band_catch_up_numba
else:
    crossing_cells = crossing_cells_numpy
    first_zero_windows = first_zero_windows_numpy
    band_catch_up = band_catch_up_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
