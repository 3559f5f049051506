import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slepian_lab import kernels

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@needs_numba
@settings(max_examples=60, deadline=None)
@given(rows=st.integers(1, 6), width=st.integers(2, 40), seed=st.integers(0, 2**32 - 1),
       scale=st.floats(0.1, 100.0))
def test_crossing_cells_backends_agree(rows, width, seed, scale):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((rows, width)) + rng.choice([-2.0, 0.0, 2.0], (rows, 1))
    v[rng.random((rows, width)) < 0.05] = 0.0
    e = rng.standard_exponential((rows, width - 1))
    a = kernels.crossing_cells_numpy(v, e, scale)
    b = kernels.crossing_cells_numba(v, e, scale)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_numba
@settings(max_examples=60, deadline=None)
@given(rows=st.integers(1, 6), half=st.integers(1, 6), extra=st.integers(0, 30),
       seed=st.integers(0, 2**32 - 1))
def test_first_zero_windows_backends_agree(rows, half, extra, seed):
    n = 2 * half
    steps = (np.random.default_rng(seed).integers(0, 2, (rows, n + extra), dtype=np.int8) << 1) - 1
    a = kernels.first_zero_windows_numpy(steps, n)
    b = kernels.first_zero_windows_numba(steps, n)
    assert np.array_equal(a, b)
    for r, k in enumerate(a):
        if k >= 0:
            assert steps[r, k:k + n].sum() == 0
            assert all(steps[r, j:j + n].sum() != 0 for j in range(k))


@needs_numba
@settings(max_examples=60, deadline=None)
@given(rows=st.integers(1, 5), width=st.integers(1, 50), seed=st.integers(0, 2**32 - 1),
       weight=st.floats(1.05, 20.0), index0=st.integers(0, 100))
def test_band_catch_up_backends_agree(rows, width, seed, weight, index0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((rows, width))
    c0 = rng.integers(0, index0 + 1, rows).astype(np.int64)
    a = kernels.band_catch_up_numpy(v, 0.5, weight, c0, index0)
    b = kernels.band_catch_up_numba(v, 0.5, weight, c0, index0)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_env_flag_selects_numpy_and_output_matches():
    code = ("import numpy as np; from slepian_lab import kernels, slepian; "
            "print(kernels.BACKEND); "
            "f = slepian.sample_first_passage(3, 500, 2**-6); print(repr(f.tolist()))")
    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SLEPIAN_LAB_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        outs[flag] = res.stdout.splitlines()
    assert outs["0"][0] == "numpy"
    if kernels.HAVE_NUMBA:
        assert outs["1"][0] == "numba"
    assert outs["0"][1] == outs["1"][1]
