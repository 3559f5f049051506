import math

import numpy as np
import pytest
from scipy import integrate

from slepian_lab import densities, slepian, stats
from slepian_lab.paths import GridPath, SeedSpec

DT = 2.0**-6  # exact in-cell detection makes the laws grid-free


def test_slepian_from_bm_linear_path():
    t = np.arange(0, 3 + 1e-12, 0.25)
    s = slepian.slepian_from_bm(GridPath(0.0, 0.25, 2.0 * t))
    assert np.allclose(s.values, 2.0) and s.duration == pytest.approx(2.0)
    with pytest.raises(ValueError):
        slepian.slepian_from_bm(GridPath(0.0, 0.25, [0.0, 1.0, 2.0]))


def test_slepian_covariance():
    s = slepian.slepian_rows(SeedSpec(1).rng(), 100_000, 8, 2)
    for i, j in [(0, 0), (0, 2), (0, 4), (3, 9), (0, 8), (2, 16)]:
        lag = abs(i - j) / 8
        assert np.mean(s[:, i] * s[:, j]) == pytest.approx(max(1 - lag, 0.0), abs=0.015)


def test_slepian_from_bridges_integer_values_and_covariance():
    p = slepian.slepian_from_bridges(SeedSpec(2), 3, 0.1)
    z = SeedSpec(2).rng().standard_normal((1, 4))[0]
    assert np.array_equal(p.values[::10], z)
    with pytest.raises(ValueError):
        slepian.slepian_from_bridges(SeedSpec(2), 1.5, 0.1)
    s = slepian.slepian_bridge_rows(SeedSpec(3).rng(), 100_000, 10, 2)
    assert np.mean(s[:, 3] * s[:, 11]) == pytest.approx(0.2, abs=0.015)
    assert np.mean(s[:, 5] ** 2) == pytest.approx(1.0, abs=0.02)


def test_constructions_agree_in_law():
    a = slepian.slepian_rows(SeedSpec(4).rng(), 20_000, 8, 1)
    b = slepian.slepian_bridge_rows(SeedSpec(5).rng(), 20_000, 8, 1)
    assert stats.ks_two_sample(a[:, 4], b[:, 4], 1e-3).passed
    assert stats.ks_two_sample(a[:, 4] - a[:, 1], b[:, 4] - b[:, 1], 1e-3).passed


def test_stationarity():
    s = slepian.slepian_rows(SeedSpec(6).rng(), 20_000, 10, 3)
    assert stats.ks_two_sample(s[:, 3], s[:, 23], 1e-3).passed


def test_first_zero_examples():
    z = slepian.first_zero(GridPath(0.0, 0.1, [1.0, 0.5, -0.5]))
    assert z.time == pytest.approx(0.15) and z.left_index == 1
    assert slepian.first_zero(GridPath(0.0, 0.1, [1.0, 2.0, 0.5])) is None
    assert slepian.first_zero(GridPath(2.0, 0.1, [0.0, 1.0])).time == 2.0


def test_last_zero_before_examples():
    p = GridPath(0.0, 0.25, [1.0, -1.0, -2.0, 2.0, 1.0])
    assert slepian.last_zero_before(p, 1.0).time == pytest.approx(0.625)
    assert slepian.last_zero_before(p, 0.5).time == pytest.approx(0.125)
    assert slepian.last_zero_before(GridPath(0.0, 0.5, [1.0, 2.0, 3.0]), 1.0) is None
    with pytest.raises(ValueError):
        slepian.last_zero_before(p, 1.5)


def _hit_time_cdf(x, y, h, var):
    def dens(t):
        return (abs(x) / math.sqrt(2 * math.pi * var * t**3) * math.exp(-x * x / (2 * var * t))
                * math.exp(-y * y / (2 * var * (h - t))) / math.sqrt(h - t))

    total = integrate.quad(dens, 0, h, limit=200)[0]
    return lambda t: np.array([integrate.quad(dens, 0, v, limit=200)[0] for v in np.atleast_1d(t)]) / total


@pytest.mark.parametrize("x,y", [(0.8, -0.3), (0.5, 0.7), (-0.4, -0.2), (0.6, 0.0)])
def test_first_hit_offset_law(x, y):
    h, var = 0.5, 2.0
    tau = slepian.first_hit_offset(np.random.default_rng(7), np.full(4000, x), np.full(4000, y), h, var)
    assert np.all((tau > 0) & (tau < h))
    assert stats.ks_one_sample(tau, _hit_time_cdf(x, y, h, var), 1e-3).passed


def test_first_hit_offset_from_zero():
    tau = slepian.first_hit_offset(np.random.default_rng(0), np.zeros(3), np.ones(3), 1.0)
    assert np.array_equal(tau, np.zeros(3))


def test_no_zero_fraction_and_linear_bias():
    f = slepian.sample_first_passage(SeedSpec(8), 100_000, 2.0**-10)
    none = float(np.mean(f > 1))
    assert none == pytest.approx(0.5 - 1 / math.pi, abs=0.01)
    assert np.all((f > 0) & ((f <= 1) | np.isinf(f)))
    # grid-only detection misses excursions shorter than a cell and so finds fewer zeros
    lin = slepian.sample_first_passage(SeedSpec(8), 20_000, 2.0**-10, detection="linear")
    assert float(np.mean(lin > 1)) > none
    with pytest.raises(ValueError):
        slepian.sample_first_passage(SeedSpec(8), 10, DT, detection="cubic")


def test_first_passage_density_shape():
    f = slepian.sample_first_passage(SeedSpec(9), 40_000, DT)
    f = f[f <= 1]
    cdf = lambda a: densities.first_passage_cdf(np.clip(a, 0, 1)) / (0.5 + 1 / math.pi)
    assert stats.ks_one_sample(f, cdf, 1e-3).passed


def test_last_zero_time_reversal():
    # 1 - G on [0, 1] (G = 0 when there is no zero) has the law of min(F, 1)
    rng = SeedSpec(10).rng()
    s = slepian.slepian_rows(rng, 40_000, 64, 1)
    _, g, _, _ = slepian.first_last_zeros(rng, s, DT)
    one_minus_g = 1 - np.nan_to_num(g, nan=0.0)
    f = slepian.sample_first_passage(SeedSpec(11), 40_000, DT)
    assert stats.ks_two_sample(one_minus_g, np.minimum(f, 1.0), 1e-3).passed


def test_quadruples():
    q = slepian.sample_quadruples(SeedSpec(12), 20_000, DT)
    f, g = q["f"], q["g"]
    assert f.size == 20_000 and np.all((0 < f) & (f < g) & (g < 1))
    rate = q["accepted_in_trials"] / q["trials"]
    assert rate == pytest.approx(0.5 + 1 / math.pi, abs=0.01)
    assert stats.ks_two_sample(q["s0"], -q["s0"], 1e-3).passed
    assert np.all(q["tail_ok"])
    mid = q["mid"][np.isfinite(q["mid"])]
    assert mid.size > 0.9 * f.size
    assert stats.ks_one_sample(mid, stats.normal_cdf(1.0), 1e-3).passed


def test_sample_quadruple_single():
    got = [slepian.sample_quadruple(SeedSpec(13, k), DT) for k in range(50)]
    ok = [g for g in got if g is not None]
    assert 25 <= len(ok) <= 50
    assert all(0 < g.f < g.g < 1 for g in ok)
    with pytest.raises(ValueError):
        slepian.Quadruple(0.1, 0.2, 0.6, 0.5)


def test_quadruples_deterministic_across_threads():
    a = slepian.sample_quadruples(SeedSpec(14), 3000, DT, threads=1)
    b = slepian.sample_quadruples(SeedSpec(14), 3000, DT, threads=3)
    assert all(np.array_equal(a[k], b[k]) for k in ("s0", "s1", "f", "g"))


def test_bridge_like_window():
    dt = 2.0**-10
    for k in range(5):
        w = slepian.sample_bridge_like_window(SeedSpec(15, k), dt)
        assert w is not None and w.values[0] == 0.0
        assert w.duration == pytest.approx(1.0)
        assert abs(w.values[-1]) <= 4 * math.sqrt(dt)
    with pytest.raises(ValueError):
        slepian.sample_bridge_like_window(SeedSpec(15), dt, horizon_cap=1)

