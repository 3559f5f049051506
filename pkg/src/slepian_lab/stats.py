"""Goodness-of-fit tests and sample summaries used by the validation suites."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .densities import ks_sf

DEFAULT_ALPHA = 1e-3


class Ecdf:
    """Right-continuous empirical CDF of a sample."""

    def __init__(self, sample):
        x = np.sort(np.asarray(sample, dtype=float).ravel())
        if x.size == 0:
            raise ValueError("empty sample")
        self.values = x
        self.n = x.size

    def __call__(self, t):
        return np.searchsorted(self.values, t, side="right") / self.n


@dataclass(frozen=True)
class TestReport:
    test: str
    statistic: float
    p_value: float
    n: int | tuple[int, ...]
    alpha: float = DEFAULT_ALPHA

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value out of range: {self.p_value}")

    @property
    def passed(self) -> bool:
        return self.p_value > self.alpha

    def to_dict(self):
        d = asdict(self)
        d["n"] = list(self.n) if isinstance(self.n, tuple) else self.n
        d["pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _sample(x, min_n=20):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if x.size < min_n:
        raise ValueError(f"need at least {min_n} observations, got {x.size}")
    return x


def ks_one_sample(sample, cdf, alpha=DEFAULT_ALPHA) -> TestReport:
    """One-sample KS test with the asymptotic Kolmogorov p-value."""
    x = np.sort(_sample(sample))
    n = x.size
    f = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    # sup of |ECDF - F| is attained next to the jumps
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)))
    return TestReport("ks_one_sample", d, ks_sf(math.sqrt(n) * d), n, alpha)


def ks_two_sample(a, b, alpha=DEFAULT_ALPHA) -> TestReport:
    a = np.sort(_sample(a))
    b = np.sort(_sample(b))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    ne = a.size * b.size / (a.size + b.size)
    return TestReport("ks_two_sample", d, ks_sf(math.sqrt(ne) * d), (a.size, b.size), alpha)


def merge_small_cells(counts, expected, min_expected=5.0):
    """Pool cells, in order, until every pooled expectation reaches the floor."""
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(counts, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp:
            obs[-1] += o_acc
            exp[-1] += e_acc
        else:
            obs.append(o_acc)
            exp.append(e_acc)
    return np.array(obs), np.array(exp)


def chi_square_gof(counts, expected, alpha=DEFAULT_ALPHA, ddof=0) -> TestReport:
    """Pearson chi-square test; cells with small expectation are merged."""
    counts = np.asarray(counts, dtype=float).ravel()
    expected = np.asarray(expected, dtype=float).ravel()
    if counts.shape != expected.shape:
        raise ValueError("counts and expected must have the same length")
    if np.any(expected < 0) or np.any(counts < 0):
        raise ValueError("counts and expected must be nonnegative")
    obs, exp = merge_small_cells(counts, expected)
    dof = obs.size - 1 - ddof
    if dof < 1:
        raise ValueError("not enough cells for a chi-square test")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    p = float(special.gammaincc(dof / 2.0, stat / 2.0))
    return TestReport("chi_square_gof", stat, p, int(counts.sum()), alpha)


def tv_distance(p: dict, q: dict) -> float:
    """Total variation distance between two laws given as {outcome: mass}."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(float(p.get(k, 0.0)) - float(q.get(k, 0.0))) for k in keys)


def empirical_cov(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.mean((x - x.mean()) * (y - y.mean())))


def binomial_estimate(successes: int, n: int):
    """Proportion with its binomial standard error."""
    p = successes / n
    return p, math.sqrt(max(p * (1 - p), 0.0) / n)


def normal_cdf(var):
    """CDF of N(0, var), for use with ks_one_sample."""
    s = math.sqrt(var)
    return lambda x: 0.5 * special.erfc(-np.asarray(x) / (s * math.sqrt(2.0)))
