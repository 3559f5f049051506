"""Time the numba and numpy kernel backends on representative workloads.

Run with ``python benchmarks/bench_kernels.py``.  Each kernel is called
directly through both implementations (after one warm-up call, which also
compiles the numba version) and the outputs are checked to be identical.
The last section times a full first-passage run in a subprocess with
SLEPIAN_LAB_NUMBA=0 and =1, which is how the backend is chosen in practice.
"""
import os
import subprocess
import sys
import time

import numpy as np

from slepian_lab import kernels


def best_of(func, repeats=3):
    func()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = func()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def workloads():
    rng = np.random.default_rng(0)
    n = 1024
    s = np.cumsum(rng.standard_normal((1024, n + 1)) * np.sqrt(2.0 / n), axis=1)
    s += rng.standard_normal((1024, 1))
    expo = rng.standard_exponential((1024, n))
    yield "crossing_cells 1024x1025", (
        lambda: kernels.crossing_cells_numpy(s, expo, n),
        lambda: kernels.crossing_cells_numba(s, expo, n),
    )
    steps = (rng.integers(0, 2, (4096, 200), dtype=np.int8) << 1) - 1
    yield "first_zero_windows n=100 4096x200", (
        lambda: kernels.first_zero_windows_numpy(steps, 100),
        lambda: kernels.first_zero_windows_numba(steps, 100),
    )
    band = rng.standard_normal((256, 4096))
    c0 = np.zeros(256, dtype=np.int64)
    yield "band_catch_up 256x4096", (
        lambda: kernels.band_catch_up_numpy(band, 0.125, 10.0, c0, 0),
        lambda: kernels.band_catch_up_numba(band, 0.125, 10.0, c0, 0),
    )


def end_to_end():
    code = ("import time; from slepian_lab import slepian; t=time.perf_counter(); "
            "slepian.sample_first_passage(1, 20000, 2**-10); print(time.perf_counter()-t)")
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SLEPIAN_LAB_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        out[flag] = float(res.stdout.strip())
    return out


def main():
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    print(f"{'kernel':38s} {'numpy s':>9s} {'numba s':>9s} {'speedup':>8s} identical")
    for name, (np_func, nb_func) in workloads():
        t_np, a = best_of(np_func)
        t_nb, b = best_of(nb_func)
        print(f"{name:38s} {t_np:9.4f} {t_nb:9.4f} {t_np / t_nb:8.1f} {same(a, b)}")
    e2e = end_to_end()
    print(f"sample_first_passage 2e4 paths, dt=2^-10: numpy {e2e['0']:.2f} s, numba {e2e['1']:.2f} s "
          "(numba time includes JIT compilation)")


if __name__ == "__main__":
    main()
