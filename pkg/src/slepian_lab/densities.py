"""Closed-form laws of the Slepian process and their numerical checks.

Covers the first-passage density on the unit interval, the joint density of
(S0, S1, F, G), the (F, G) marginal, Shepp's determinant formula at integer
times, the two Radon-Nikodym derivatives against a Brownian motion with
Gaussian start, the Palm-Levy and Ito excursion tails, and the
Kolmogorov-Smirnov law.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# The printed closed form for the (F, G) joint density equals 1/FG_CONSTANT
# times the marginal of quadruple_density.  Verified numerically by
# fg_verification_constants(), not assumed.
FG_CONSTANT = 1.0 / math.pi


# --- Gaussian helpers ---


def phi(x, theta=1.0):
    """Normal density with variance ``theta``."""
    x = np.asarray(x, dtype=float)
    return INV_SQRT_2PI / np.sqrt(theta) * np.exp(-0.5 * x * x / theta)


def Phi(x):
    """Standard normal CDF through erfc, accurate in both tails."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=float) / SQRT2)


def _check_unit(a, name="a", closed_right=False):
    a = np.asarray(a, dtype=float)
    upper_ok = a <= 1 if closed_right else a < 1
    if not np.all((a > 0) & upper_ok):
        raise ValueError(f"{name} must lie in (0, 1{']' if closed_right else ')'}")
    return a


# --- first passage and excursion tails ---


def first_passage_density(a):
    """Density of the first zero F of S at ``a`` in (0, 1)."""
    a = _check_unit(a)
    return np.sqrt((2.0 - a) / a) / math.pi


def first_passage_cdf(a):
    """P(F <= a) for a in [0, 1]; equals 1/2 + 1/pi at a = 1."""
    a = np.asarray(a, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise ValueError("a must lie in [0, 1]")
    return (2.0 * np.arcsin(np.sqrt(a / 2.0)) + np.sqrt(a * (2.0 - a))) / math.pi


def palm_levy_tail(a):
    """Palm-Levy mass of excursions longer than ``a``, for a in (0, 1)."""
    a = _check_unit(a)
    return np.sqrt((2.0 - a) / a) / math.pi


def ito_tail(a):
    """Ito excursion-law mass of excursions longer than ``a`` > 0."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("a must be positive")
    return np.sqrt(2.0 / (math.pi * a))


# --- joint laws of (S0, S1, F, G) ---


def _check_ab(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~((0 < a) & (a < b) & (b < 1))):
        raise ValueError("need 0 < a < b < 1")
    return a, b


def quadruple_density(x, y, a, b):
    """Joint density of (S0, S1, F, G) at (x, y, a, b)."""
    a, b = _check_ab(a, b)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pref = np.abs(x * y) / (8 * math.pi**2 * np.sqrt((b - a) * a**3 * (1 - b) ** 3))
    return pref * np.exp(-x * x / (4 * a) - y * y / (4 * (1 - b)) - (x + y) ** 2 / 4)


def fg_density(a, b):
    """The closed form obtained by integrating out S0 and S1, as printed.

    Multiply by :data:`FG_CONSTANT` to get the probability density of (F, G).
    """
    a, b = _check_ab(a, b)
    c = 2.0 + a - b
    r = a * (1.0 - b)
    return 2.0 / (math.pi * np.sqrt(b - a)) * (
        1.0 / (c * np.sqrt(r)) + c**-1.5 * np.arctan(np.sqrt(r / c))
    )


def _gl(points, lo, hi):
    x, w = np.polynomial.legendre.leggauss(points)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def fg_marginal_numeric(a, b, points=64, radius=8.0):
    """Integrate quadruple_density over (x, y) by tensor Gauss-Legendre.

    Each quadrant is integrated separately (the kernel has a kink on the axes)
    in units of the marginal standard deviations sqrt(2a) and sqrt(2(1-b)),
    truncated at ``radius``.
    """
    a, b = _check_ab(a, b)
    shape = np.broadcast(a, b).shape
    a = np.broadcast_to(a, shape).ravel()
    b = np.broadcast_to(b, shape).ravel()
    u, w = _gl(points, 0.0, radius)
    uw = u * w
    out = np.empty(a.size)
    chunk = max(1, 2**21 // (points * points))
    for lo in range(0, a.size, chunk):
        sa = np.sqrt(2 * a[lo : lo + chunk])[:, None, None]
        sb = np.sqrt(2 * (1 - b[lo : lo + chunk]))[:, None, None]
        x = sa * u[None, :, None]
        y = sb * u[None, None, :]
        base = np.exp(-0.5 * (u[:, None] ** 2 + u[None, :] ** 2))
        cross = np.exp(-((x + y) ** 2) / 4) + np.exp(-((x - y) ** 2) / 4)
        s = np.einsum("i,j,pij->p", uw, uw, base * cross)
        aa = a[lo : lo + chunk]
        bb = b[lo : lo + chunk]
        # |xy| dx dy = (sa sb)^2 u v du dv; factor 2 for the mirrored quadrants
        jac = 2 * (2 * aa) * (2 * (1 - bb))
        out[lo : lo + chunk] = jac * s / (
            8 * math.pi**2 * np.sqrt((bb - aa) * aa**3 * (1 - bb) ** 3)
        )
    return out.reshape(shape)


FG_CHECK_POINTS = ((0.2, 0.7), (0.1, 0.3), (0.5, 0.6), (0.05, 0.95), (0.4, 0.9))


def fg_verification_constants(points=FG_CHECK_POINTS):
    """Ratio (numeric marginal) / fg_density at each check point."""
    a, b = np.array(points, dtype=float).T
    return fg_marginal_numeric(a, b) / fg_density(a, b)


def _sin2_nodes(points):
    # t = sin^2(theta) maps [0, pi/2] onto [0, 1] and cancels inverse square
    # root singularities at both ends.
    th, w = _gl(points, 0.0, 0.5 * math.pi)
    return np.sin(th) ** 2, w * np.sin(2 * th)


def fg_cell_masses(edges, points=24, inner_points=64):
    """Probability of each (F, G) histogram cell under the (x, y) marginal.

    ``edges`` are bin edges on [0, 1] shared by both axes.  Returns a square
    matrix ``m[i, j] = P(F in bin i, G in bin j)``; cells with i > j are 0.
    """
    edges = np.asarray(edges, dtype=float)
    k = edges.size - 1
    t, wt = _sin2_nodes(points)
    aa, bb, ww, cell = [], [], [], []
    for i in range(k):
        a0, a1 = edges[i], edges[i + 1]
        for j in range(i, k):
            b0, b1 = edges[j], edges[j + 1]
            if i < j:
                a = a0 + (a1 - a0) * t[:, None]
                b = b0 + (b1 - b0) * t[None, :]
                w = (a1 - a0) * (b1 - b0) * wt[:, None] * wt[None, :]
            else:
                a = a0 + (a1 - a0) * t[:, None]
                b = a + (a1 - a) * t[None, :]
                w = (a1 - a0) * (a1 - a) * wt[:, None] * wt[None, :]
            a, b = np.broadcast_arrays(a, b)
            aa.append(a.ravel())
            bb.append(b.ravel())
            ww.append(w.ravel())
            cell.append(np.full(a.size, i * k + j))
    a = np.concatenate(aa)
    b = np.concatenate(bb)
    ok = (a > 0) & (a < b) & (b < 1)
    vals = np.zeros(a.size)
    vals[ok] = fg_marginal_numeric(a[ok], b[ok], points=inner_points)
    mass = np.bincount(np.concatenate(cell), weights=vals * np.concatenate(ww), minlength=k * k)
    return mass.reshape(k, k)


# --- Shepp's formula ---


def shepp_integrand_t1(x):
    """Integrand of P(F > 1) over the starting value x."""
    return Phi(0.0) * phi(x) - phi(0.0) * Phi(-np.abs(x))


def shepp_survival_t1(points=96, radius=8.0):
    """P(F > 1) by Gauss-Legendre quadrature of the n = 1 determinant."""
    x, w = _gl(points, 0.0, radius)
    return float(2.0 * np.dot(w, shepp_integrand_t1(x)))


@dataclass(frozen=True)
class QuadratureSpec:
    """How to evaluate Shepp's integral: tensor Gauss-Legendre or Sobol."""

    method: str = "tensor"
    points: int = 40
    radius: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("tensor", "qmc"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.points < 16:
            raise ValueError("need at least 16 points per axis")
        if self.radius < 6:
            raise ValueError("truncation radius must be at least 6")


def shepp_determinant(y):
    """det[phi(y_i - y_{j+1})] for rows of ``y`` = (y_0, ..., y_{n+1})."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1] - 2
    mat = phi(y[..., : n + 1, None] - y[..., None, 1:])
    return np.linalg.det(mat)


def _shepp_nodes(n, q):
    """Nodes (|x|, gaps) and weights on [0, R]^(n+1) for the ordered domain."""
    dim = n + 1
    if q.method == "tensor":
        u, w = _gl(q.points, 0.0, q.radius)
        grids = np.meshgrid(*([u] * dim), indexing="ij")
        wgrid = np.meshgrid(*([w] * dim), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1)
        weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
        return nodes, weights
    from scipy.stats import qmc

    m = int(math.ceil(math.log2(q.points**dim)))
    sob = qmc.Sobol(dim, scramble=True, seed=q.seed).random_base2(m)
    # first axis is |x|; the others are sorted into an increasing chain above it
    x = sob[:, :1] * q.radius
    ys = np.sort(sob[:, 1:], axis=1) * q.radius
    gaps = np.diff(np.concatenate([np.zeros((len(ys), 1)), ys], axis=1), axis=1)
    vol = q.radius**dim / math.factorial(n)
    return np.concatenate([x, gaps], axis=1), np.full(len(sob), vol / len(sob))


def shepp_survival_integer(n: int, q: QuadratureSpec = QuadratureSpec()) -> float:
    """P(F > n) for n in {1, 2, 3} from the integer-time determinant.

    The chain |x| = y_1 < y_2 < ... < y_{n+1} is written through its gaps,
    each truncated at the quadrature radius; the x integral uses symmetry.
    """
    if n not in (1, 2, 3):
        raise NotImplementedError("only n in {1, 2, 3} is supported")
    nodes, weights = _shepp_nodes(n, q)
    total = 0.0
    chunk = 2**18
    for lo in range(0, len(nodes), chunk):
        nd = nodes[lo : lo + chunk]
        y = np.concatenate([np.zeros((len(nd), 1)), np.cumsum(nd, axis=1)], axis=1)
        total += float(np.dot(weights[lo : lo + chunk], shepp_determinant(y)))
    return 2.0 * total


# --- Radon-Nikodym derivatives ---


def rn_derivative_slepian(w0, wt, t):
    """Density of the Slepian law on [0, t] against sqrt(2)(xi + B)."""
    if not 0 < t <= 1:
        raise ValueError("t must lie in (0, 1]")
    w0 = np.asarray(w0, dtype=float)
    wt = np.asarray(wt, dtype=float)
    return 2.0 / math.sqrt(2.0 - t) * np.exp(w0 * w0 / 4 - (w0 + wt) ** 2 / (4 * (2 - t)))


def rn_derivative_shifted(w0, w1, t):
    """Density of the Slepian law on [t, t+1] against sqrt(2)(xi + B) there.

    The unit-horizon density composed with the change of starting law
    N(0, 2) -> N(0, 2(1 + t)); at t = 0 it is rn_derivative_slepian(., ., 1).
    """
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    w0 = np.asarray(w0, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    return 2.0 * math.sqrt(1 + t) * np.exp(w0 * w0 / (4 * (1 + t)) - (w0 + w1) ** 2 / 4)


# --- Kolmogorov-Smirnov law ---


def ks_cdf(x, tol=1e-12):
    """P(sup |b| <= x) for a standard Brownian bridge b."""
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if x < 1.0:
        # theta-function form converges fast for small x
        s, k = 0.0, 1
        c = math.pi**2 / (8 * x * x)
        while True:
            term = math.exp(-c * k * k)
            s += term
            if term < tol:
                break
            k += 2
        return min(1.0, math.sqrt(2 * math.pi) / x * s)
    s, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return max(0.0, 1.0 - 2.0 * s)


def ks_sf(x, tol=1e-300):
    """1 - ks_cdf(x), summed directly in the upper tail to keep precision."""
    x = float(x)
    if x < 1.0:
        return 1.0 - ks_cdf(x)
    s, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        s += term if k % 2 else -term
        if term < tol or term < 1e-17 * s:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))
