"""One-dimensional laws: standard Gaussian and standard symmetric alpha-stable.

All functions work with ``|xi|``.  Probabilities that are raised to huge
powers are handled in the log domain; ``log_neg_log_cdf`` is the workhorse,
returning ``log(-log P(|xi| <= r))`` as a function of ``log r``.

The stable CDF uses the Zolotarev integral representation (non-oscillatory,
integrated over ``theta in (0, pi/2)``), with convergent or asymptotic
series at the extremes.  Internal vectorised evaluation goes through a cached
monotone interpolation table per ``alpha``.
"""

import json
import math
import os
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate, optimize, special

LOG2 = math.log(2.0)
HALF_PI = 0.5 * math.pi


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class Law:
    """Law of the driving variables.

    ``alpha == 2`` is Gaussian with standard deviation ``scale``; otherwise
    standard symmetric alpha-stable with characteristic function
    ``exp(-|u|^alpha)`` (``scale`` must be 1).
    """

    alpha: float = 2.0
    scale: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.alpha < 2.0 and self.scale != 1.0:
            raise ValueError("stable laws are standard; scale is handled by callers")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @classmethod
    def gaussian(cls):
        return cls(2.0, 1.0)

    @classmethod
    def stable(cls, alpha):
        # alpha = 2 in the stable parameterisation is N(0, 2)
        if alpha == 2.0:
            return cls(2.0, math.sqrt(2.0))
        return cls(float(alpha), 1.0)

    @property
    def is_gaussian(self):
        return self.alpha == 2.0

    @property
    def tail_index(self):
        """Exponent in ``P(|xi| <= r) >= exp(-A r^-a)``; 2 for Gaussian."""
        return self.alpha

    def to_dict(self):
        return {"alpha": self.alpha, "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        if d.get("kind") == "gaussian":
            return cls(2.0, float(d.get("scale", 1.0)))
        alpha = float(d.get("alpha", 2.0))
        if "scale" in d:
            return cls(alpha, float(d["scale"]))
        return cls.gaussian() if alpha == 2.0 else cls.stable(alpha)


# ---------------------------------------------------------------------------
# exact scalar evaluation


def _zolotarev(log_r, a):
    """Return ``(cdf, tail)`` of ``|xi|`` for a stable law with ``a != 1``.

    Both are computed from the same integral; the smaller one is returned
    directly and the larger as its complement.
    """
    p = a / (a - 1.0)
    lx = p * log_r

    def lg(th):
        return lx + p * math.log(math.cos(th) / math.sin(a * th)) + math.log(
            math.cos((a - 1.0) * th) / math.cos(th)
        )

    lo, hi = 1e-300, HALF_PI * (1.0 - 1e-16)
    flo, fhi = lg(lo), lg(hi)
    pts = []
    for lev in (-8.0, -3.0, 0.0, 1.5, 3.5):
        if (flo - lev) * (fhi - lev) < 0:
            pts.append(optimize.brentq(lambda t: lg(t) - lev, lo, hi, xtol=1e-300, rtol=1e-15))
    edges = [0.0] + sorted(pts) + [HALF_PI]

    def e(th):
        g = lg(th)
        return math.exp(-math.exp(g)) if g < 700 else 0.0

    def m(th):
        g = lg(th)
        return -math.expm1(-math.exp(g)) if g < 700 else 1.0

    i_e = i_m = 0.0
    with warnings.catch_warnings():
        # the requested relative accuracy is near machine precision
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for u, v in zip(edges[:-1], edges[1:]):
            i_e += integrate.quad(e, u, v, epsabs=0, epsrel=1e-13, limit=400)[0]
            i_m += integrate.quad(m, u, v, epsabs=0, epsrel=1e-13, limit=400)[0]
    i_e /= HALF_PI
    i_m /= HALF_PI
    # a < 1: cdf = i_e, tail = i_m ; a > 1: cdf = i_m, tail = i_e
    cdf, tail = (i_e, i_m) if a < 1 else (i_m, i_e)
    if cdf < tail:
        return cdf, 1.0 - cdf
    return 1.0 - tail, tail


def _stable_tail_series(log_r, a, max_terms=200):
    """Series for ``P(|xi| > r)``; convergent for ``a < 1``, asymptotic otherwise."""
    total = 0.0
    best = math.inf
    for k in range(1, max_terms):
        sgn = 1.0 if k % 2 else -1.0
        s = math.sin(k * math.pi * a / 2.0)
        if abs(s) < 1e-12:
            continue
        lt = special.gammaln(a * k) - special.gammaln(k + 1) - a * k * log_r
        term = sgn * s * math.exp(lt)
        if a > 1 and abs(term) > best:
            break
        best = min(best, abs(term))
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total / HALF_PI


def _stable_cdf_series(log_r, a, terms=8):
    """Small-r series for ``P(|xi| <= r)`` (density expansion at the origin)."""
    total = 0.0
    for k in range(terms):
        lt = special.gammaln((2 * k + 1) / a) - special.gammaln(2 * k + 2) + (2 * k + 1) * log_r
        total += (-1.0) ** k * math.exp(lt)
    return total / (HALF_PI * a)


def _large_r_threshold(a):
    """log r beyond which the tail series is used."""
    if a < 1:
        return math.log(20.0)
    return math.log(200.0) / a + 0.5


def _exact_pair(law, r):
    """``(cdf, tail)`` of ``|xi|`` at a scalar ``r >= 0``."""
    if r <= 0:
        return 0.0, 1.0
    if math.isinf(r):
        return 1.0, 0.0
    if law.is_gaussian:
        x = r / (law.scale * math.sqrt(2.0))
        return math.erf(x), math.erfc(x)
    a = law.alpha
    if a == 1.0:
        c = math.atan(r) / HALF_PI
        return c, math.atan(1.0 / r) / HALF_PI
    lr = math.log(r)
    if lr > _large_r_threshold(a):
        t = _stable_tail_series(lr, a)
        return 1.0 - t, t
    if lr < -8.0:
        c = _stable_cdf_series(lr, a)
        return c, 1.0 - c
    return _zolotarev(lr, a)


def cdf_abs(law, r):
    """``P(|xi| <= r)``; scalar or array."""
    if np.ndim(r) == 0:
        return _exact_pair(law, float(r))[0]
    return np.array([_exact_pair(law, float(x))[0] for x in np.ravel(r)]).reshape(np.shape(r))


def tail_abs(law, r):
    """``P(|xi| > r)`` without cancellation for large r."""
    if np.ndim(r) == 0:
        return _exact_pair(law, float(r))[1]
    return np.array([_exact_pair(law, float(x))[1] for x in np.ravel(r)]).reshape(np.shape(r))


def _stable_pdf(x, a):
    if a == 1.0:
        return 1.0 / (math.pi * (1.0 + x * x))
    if x == 0.0:
        return math.exp(special.gammaln(1.0 + 1.0 / a)) / math.pi
    lr = math.log(x)
    if lr > _large_r_threshold(a):
        # term-wise derivative of the tail series (one side)
        total, best = 0.0, math.inf
        for k in range(1, 200):
            s = math.sin(k * math.pi * a / 2.0)
            if abs(s) < 1e-12:
                continue
            term = (1.0 if k % 2 else -1.0) * s * math.exp(
                special.gammaln(a * k + 1) - special.gammaln(k + 1) - (a * k + 1) * lr
            )
            if a > 1 and abs(term) > best:
                break
            best = min(best, abs(term))
            total += term
            if abs(term) < 1e-17 * abs(total):
                break
        return total / math.pi
    p = a / (a - 1.0)
    lx = p * lr

    def lg(th):
        return lx + p * math.log(math.cos(th) / math.sin(a * th)) + math.log(
            math.cos((a - 1.0) * th) / math.cos(th)
        )

    def h(th):
        g = lg(th)
        return math.exp(g - math.exp(g)) if g < 700 else 0.0

    lo, hi = 1e-300, HALF_PI * (1.0 - 1e-16)
    pts = []
    for lev in (-3.0, 0.0, 2.0):
        if (lg(lo) - lev) * (lg(hi) - lev) < 0:
            pts.append(optimize.brentq(lambda t: lg(t) - lev, lo, hi, xtol=1e-300, rtol=1e-15))
    edges = [0.0] + sorted(pts) + [HALF_PI]
    val = sum(integrate.quad(h, u, v, epsabs=0, epsrel=1e-12, limit=400)[0] for u, v in zip(edges[:-1], edges[1:]))
    return a * val / (math.pi * abs(a - 1.0) * x)


def pdf_abs(law, r):
    """Density of ``|xi|`` at ``r >= 0`` (twice the symmetric density)."""

    def one(x):
        x = abs(float(x))
        if law.is_gaussian:
            s = law.scale
            return 2.0 * math.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
        return 2.0 * _stable_pdf(x, law.alpha)

    if np.ndim(r) == 0:
        return one(r)
    return np.array([one(x) for x in np.ravel(r)]).reshape(np.shape(r))


# ---------------------------------------------------------------------------
# fast log-domain evaluation

_TABLE_LO = -8.0
_TABLE_STEP = 0.025


def _cache_dir():
    return os.environ.get("SMALLDEV_CACHE")


@lru_cache(maxsize=None)
def _stable_table(alpha):
    """PCHIP of ``log(-log F)`` on ``log r in [-8, large_r_threshold]``."""
    hi = _large_r_threshold(alpha)
    grid = np.arange(_TABLE_LO, hi + _TABLE_STEP, _TABLE_STEP)
    cached = _load_table(alpha, grid)
    if cached is None:
        vals = []
        for lr in grid:
            c, t = _exact_pair(Law(alpha), math.exp(lr))
            vals.append(math.log(-math.log1p(-t)) if c > 0.5 else math.log(-math.log(c)))
        cached = np.array(vals)
        _store_table(alpha, grid, cached)
    return interpolate.CubicSpline(grid, cached, extrapolate=False)


def _table_key(alpha, grid):
    return f"lnlc:{alpha!r}:{grid[0]!r}:{grid[-1]!r}:{len(grid)}"


def _load_table(alpha, grid):
    d = _cache_dir()
    if not d:
        return None
    path = os.path.join(d, "dist1d_tables.json")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        return None
    vals = data.get(_table_key(alpha, grid))
    return None if vals is None else np.array(vals)


def _store_table(alpha, grid, vals):
    d = _cache_dir()
    if not d:
        return
    os.makedirs(d, exist_ok=True)
    path = os.path.join(d, "dist1d_tables.json")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        data = {}
    data[_table_key(alpha, grid)] = [float(v) for v in vals]
    with open(path, "w") as fh:
        json.dump(data, fh)


def _series_tail_vec(log_r, a):
    """Vectorised tail series (asymptotic/convergent regime)."""
    log_r = np.asarray(log_r, dtype=float)
    total = np.zeros_like(log_r)
    kmax = 60 if a < 1 else max(2, int(min(60, 1.0 / a * 8)))
    for k in range(1, kmax + 1):
        s = math.sin(k * math.pi * a / 2.0)
        if abs(s) < 1e-12:
            continue
        c = (1.0 if k % 2 else -1.0) * s * math.exp(special.gammaln(a * k) - special.gammaln(k + 1))
        total = total + c * np.exp(-a * k * log_r)
    return total / HALF_PI


def _series_log_tail_vec(log_r, a):
    """``log P(|xi| > r)`` for large r, robust to overflow of ``r``."""
    log_r = np.asarray(log_r, dtype=float)
    c1 = math.sin(math.pi * a / 2.0) * math.exp(special.gammaln(a)) / HALF_PI
    # leading term times a relative correction
    lead = math.log(c1) - a * log_r
    ratio = _series_tail_vec(log_r, a) * np.exp(a * np.minimum(log_r, 700.0 / a)) / c1
    ratio = np.where(log_r * a > 700.0, 1.0, ratio)
    return lead + np.log(ratio)


def log_neg_log_cdf(law, log_r):
    """``log(-log P(|xi| <= r))`` as a function of ``log r`` (vectorised)."""
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return _lnlc(law, np.asarray(log_r, dtype=float))


def _lnlc(law, log_r):
    out = np.empty_like(log_r)
    if law.is_gaussian:
        lr = log_r - math.log(law.scale)
        x = np.exp(np.minimum(lr, 300.0)) / math.sqrt(2.0)
        small = lr < -20.0
        big = x >= 1.0
        mid = ~(small | big)
        logF = math.log(2.0 / math.sqrt(math.pi)) + lr[small] - 0.5 * math.log(2.0)
        out[small] = np.log(-logF)
        out[mid] = np.log(-np.log(special.erf(x[mid])))
        out[big] = _log_neg_log1m_exp(special.log_ndtr(-np.exp(lr[big])) + LOG2)
        return out if out.ndim else float(out)
    a = law.alpha
    if a == 1.0:
        big = log_r > 0
        lr = log_r[big]
        r = np.exp(np.minimum(lr, 700.0))
        log_t = np.where(lr > 700, -lr - math.log(HALF_PI), np.log(np.arctan(1.0 / r) / HALF_PI))
        out[big] = _log_neg_log1m_exp(log_t)
        lr = log_r[~big]
        r = np.exp(np.maximum(lr, -700.0))
        logF = np.where(lr < -700, lr - math.log(HALF_PI), np.log(np.arctan(r) / HALF_PI))
        out[~big] = np.log(-logF)
        return out if out.ndim else float(out)
    hi = _large_r_threshold(a)
    lo_mask = log_r < _TABLE_LO
    hi_mask = log_r > hi
    mid = ~(lo_mask | hi_mask)
    if np.any(mid):
        out[mid] = _stable_table(a)(log_r[mid])
    if np.any(hi_mask):
        out[hi_mask] = _log_neg_log1m_exp(_series_log_tail_vec(log_r[hi_mask], a))
    if np.any(lo_mask):
        lr = log_r[lo_mask]
        # F ~ c0 r (1 - c2 r^2): two series terms suffice below e^-8
        c0 = math.exp(special.gammaln(1.0 / a)) / (HALF_PI * a)
        c2 = math.exp(special.gammaln(3.0 / a) - special.gammaln(1.0 / a)) / 6.0
        logF = math.log(c0) + lr + np.log1p(-c2 * np.exp(2 * lr))
        out[lo_mask] = np.log(-logF)
    return out if out.ndim else float(out)


def _log_neg_log1m_exp(log_t):
    """``log(-log(1 - t))`` given ``log t``."""
    log_t = np.asarray(log_t, dtype=float)
    t = np.exp(np.minimum(log_t, 0.0))
    tiny = log_t < -20.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(-np.log1p(-np.minimum(t, 1.0)))
    return np.where(tiny, log_t + np.log1p(0.5 * t), direct)


def log_cdf_abs(law, log_r):
    """``log P(|xi| <= r)`` from ``log r`` (vectorised, fast)."""
    return -np.exp(log_neg_log_cdf(law, log_r))


def log_tail_abs(law, log_r):
    """``log P(|xi| > r)`` from ``log r`` (vectorised, fast)."""
    log_r = np.asarray(log_r, dtype=float)
    if law.is_gaussian:
        with np.errstate(over="ignore"):
            return special.log_ndtr(-np.exp(log_r - math.log(law.scale))) + LOG2
    if law.alpha == 1.0:
        if np.all(log_r > 0):
            r = np.exp(np.minimum(log_r, 700))
            return np.where(log_r > 700, -log_r - math.log(HALF_PI), np.log(np.arctan(1.0 / r) / HALF_PI))
        big = log_r > 700
    else:
        big = log_r > _large_r_threshold(law.alpha)
        if np.all(big):
            return _series_log_tail_vec(log_r, law.alpha)
    z = np.exp(log_neg_log_cdf(law, log_r))
    with np.errstate(divide="ignore"):
        out = np.log(-np.expm1(-z))
    if np.any(big):
        # keep relative accuracy where the tail underflows
        if law.alpha == 1.0:
            far = -log_r - math.log(HALF_PI)
        else:
            far = _series_log_tail_vec(np.where(big, log_r, _large_r_threshold(law.alpha) + 1.0), law.alpha)
        out = np.where(big, far, out)
    return out


# ---------------------------------------------------------------------------
# small-ball and density constants


@dataclass(frozen=True)
class SmallBallConstants:
    """Certified one-dimensional constants.

    Stable: ``P(|xi| <= r) >= exp(-A r^-alpha)`` for all ``r > 0``.
    Gaussian: ``P(|xi| <= r) >= exp(-A exp(-r^2/2))`` for ``r >= 1``.
    ``c_floor`` bounds the density of ``xi`` from below on ``[-1, 1]``.
    """

    A: float
    c_floor: float
    alpha: float


def _cos_integral(a):
    # (1/2pi) int_R cos(u) exp(-|u|^a) du, the stable density at 1
    val, _ = integrate.quad(lambda u: math.exp(-(u**a)), 0.0, np.inf, weight="cos", wvar=1.0)
    return val / math.pi


@lru_cache(maxsize=None)
def small_ball_constant(law):
    if law.is_gaussian:
        # unit-variance form; callers rescale by law.scale
        r = np.linspace(1.0, 30.0, 4000)
        ratio = np.exp(log_neg_log_cdf(Law.gaussian(), np.log(r)) + 0.5 * r**2)
        return SmallBallConstants(1.05 * float(ratio.max()), (2 * math.pi * math.e) ** -0.5, 2.0)
    a = law.alpha
    lr = np.linspace(-30.0, 30.0, 6001)
    # r^a * (-log P(|xi| <= r)) in log form
    val = np.exp(a * lr + log_neg_log_cdf(law, lr))
    return SmallBallConstants(1.05 * float(val.max()), _cos_integral(a), a)


# ---------------------------------------------------------------------------
# Laplace integrals

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _gl_panels(f, a, b, m):
    edges = np.linspace(a, b, m + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    return float(np.sum(w * f(x)))


def _log_peak_integral(phi, s_star, lo, hi, tol, drop=50.0, breaks=()):
    """``log int exp(phi(s)) ds`` for a unimodal ``phi`` peaked at ``s_star``.

    ``lo < s_star < hi`` must satisfy ``phi <= phi(s_star) - drop - 10`` at
    both ends; the integral is taken between the ``drop`` level crossings.
    ``breaks`` are points where ``phi`` is not smooth; panels are split there.
    """
    top = float(phi(np.array([s_star]))[0])
    level = top - drop

    def g(s):
        return float(phi(np.array([s]))[0]) - level

    left = optimize.brentq(g, lo, s_star, xtol=1e-13, rtol=4e-15, maxiter=300) if g(lo) < 0 else lo
    right = optimize.brentq(g, s_star, hi, xtol=1e-13, rtol=4e-15, maxiter=300) if g(hi) < 0 else hi
    if right - left <= 1e-9 * (1.0 + abs(s_star)) or abs(top) > 1e12:
        # rounding in phi exceeds the O(1) width term; the latter is
        # negligible next to |top| in relative terms
        return top + math.log(max(right - left, 1e-300))

    def f(s):
        with np.errstate(over="ignore", invalid="ignore"):
            v = np.exp(phi(s) - top)
        return np.nan_to_num(v, nan=0.0)

    # rounding in phi limits the attainable relative accuracy
    tol = max(tol, 256.0 * np.finfo(float).eps * (1.0 + abs(top) + abs(s_star)))
    pts = sorted({left, right, s_star, *(b for b in breaks if left < b < right)})
    pieces = list(zip(pts[:-1], pts[1:]))
    prev = None
    for m in (2, 4, 8, 16, 32, 64, 128, 256):
        cur = sum(_gl_panels(f, u, v, m) for u, v in pieces)
        if prev is not None and abs(cur - prev) <= tol * abs(cur):
            return top + math.log(cur)
        prev = cur
    raise QuadratureError("Laplace integral did not converge", achieved=abs(cur - prev) / cur)


def _lnlc_breaks(law):
    """Points in ``log r`` where the fast evaluation switches branch."""
    if law.is_gaussian:
        return (math.log(law.scale) - 20.0, math.log(law.scale * math.sqrt(2.0)))
    if law.alpha == 1.0:
        return (0.0,)
    return (_TABLE_LO, _large_r_threshold(law.alpha))


def max_laplace(law, L=None, N=1.0, *, log_L=None, log_N=None, tol=1e-10):
    """``log int_0^inf exp(-y) P(L |xi| <= y)^N dy``, i.e. ``log E exp(-L max_N |xi|)``.

    ``L`` and ``N`` may be given through their logarithms for extreme values.
    """
    if log_L is None:
        if L is None or L < 0:
            raise ValueError("L must be non-negative")
        if L == 0:
            return 0.0
        log_L = math.log(L)
    if log_N is None:
        if N < 1:
            raise ValueError("N must be at least 1")
        log_N = math.log(N)
    return float(max_laplace_many(law, [log_L], [log_N], tol=tol)[0])


def _max_laplace_adaptive(law, log_L, log_N, tol=1e-10):
    """Scalar adaptive evaluation in ``s = log y`` around the peak of the log integrand."""

    def phi(s):
        with np.errstate(over="ignore"):
            return s - np.exp(s) - np.exp(log_N + log_neg_log_cdf(law, s - log_L))

    # the log integrand increases on s < 0 and is below s - e^s everywhere
    p0 = float(phi(np.array([0.0]))[0])
    s_up = min(745.0, math.log(abs(p0) + 10.0) + 1.0) if np.isfinite(p0) else 745.0
    grid = np.linspace(0.0, s_up, 801)
    vals = phi(grid)
    i = int(np.argmax(vals))
    if not np.isfinite(vals[i]):
        return -math.inf
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    if b > a:
        with np.errstate(invalid="ignore"):
            res = optimize.minimize_scalar(
                lambda s: -float(phi(np.array([s]))[0]), bounds=(a, b), method="bounded",
                options={"xatol": 1e-10},
            )
        s_star = float(res.x) if -res.fun >= vals[i] else float(grid[i])
    else:
        s_star = float(grid[i])
    top = float(phi(np.array([s_star]))[0])
    lo = min(-1.0, top - 70.0)
    hi = max(s_star + 1.0, math.log(abs(top) + 70.0) + 1.0)
    breaks = tuple(b + log_L for b in _lnlc_breaks(law)) + _wall_breaks(law, log_L, log_N, lo, hi)
    return _log_peak_integral(phi, s_star, lo, hi, tol, breaks=breaks)


_WALL_LEVELS = np.array([-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0])


def _wall_breaks(law, log_L, log_N, lo, hi, iters=60):
    """Points where ``N P(L|xi| > e^s)``-type term ``log N + lnlc`` crosses fixed levels.

    For large ``N`` this term falls from huge to negligible within a narrow
    window of ``s``; splitting panels there keeps the quadrature resolved.
    """

    def t(s):
        with np.errstate(over="ignore", invalid="ignore"):
            return log_N + log_neg_log_cdf(law, s - log_L)

    t_lo, t_hi = float(t(np.array([lo]))[0]), float(t(np.array([hi]))[0])
    lev = _WALL_LEVELS[(_WALL_LEVELS < t_lo) & (_WALL_LEVELS > t_hi)]
    if lev.size == 0:
        return ()
    a = np.full(lev.shape, lo)
    b = np.full(lev.shape, hi)
    for _ in range(iters):
        m = 0.5 * (a + b)
        above = t(m) > lev
        a = np.where(above, m, a)
        b = np.where(above, b, m)
    return tuple(float(x) for x in 0.5 * (a + b))


_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


def _gl_rows(f, a, b, m):
    """Composite 16-point rule on ``m`` panels of ``[a_i, b_i]`` for every row."""
    h = (b - a) / m
    x = (a[:, None, None] + h[:, None, None] * (np.arange(m)[None, :, None] + 0.5 * (_GL16_X[None, None, :] + 1.0)))
    v = f(x.reshape(len(a), -1)).reshape(x.shape)
    return 0.5 * h * np.einsum("ipq,q->i", v, _GL16_W)


def _row_peak_integrals(phi, grid_lo, grid_hi, bracket, tol, breaks=None):
    """``log int exp(phi_i)`` for rows of unimodal log-integrands.

    ``phi(s, rows)`` evaluates rows ``rows`` at a 2-D array of points.  The
    peak is located on ``[grid_lo, grid_hi]``; ``bracket(top, s_star)``
    gives ends where ``phi`` is at least 60 below the peak.  Returns the
    values and a mask of rows whose fixed-panel rule settled.
    ``breaks(rows, lo, hi)`` may return per-row points where ``phi`` bends
    sharply; panels are split there.
    """
    n = grid_lo.size
    allr = np.arange(n)

    def col(x, rows=allr):
        return phi(x[:, None], rows)[:, 0]

    u = np.linspace(0.0, 1.0, 801)
    grid = grid_lo[:, None] + (grid_hi - grid_lo)[:, None] * u[None, :]
    vals = phi(grid, allr)
    i = np.argmax(vals, axis=1)
    s_star = grid[allr, i]
    top = vals[allr, i]
    # golden section on the bracketing grid cells (phi is unimodal)
    step = (grid_hi - grid_lo) / 800.0
    a = np.maximum(s_star - step, grid_lo)
    b = np.minimum(s_star + step, grid_hi)
    gr = 0.5 * (math.sqrt(5.0) - 1.0)
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = col(c), col(d)
    for _ in range(80):
        lb = fc >= fd
        b = np.where(lb, d, b)
        a = np.where(lb, a, c)
        c_new = np.where(lb, b - gr * (b - a), d)
        d_new = np.where(lb, c, a + gr * (b - a))
        fc, fd = np.where(lb, col(c_new), fd), np.where(lb, fc, col(d_new))
        c, d = c_new, d_new
    cand = np.where(fc >= fd, c, d)
    fcand = np.maximum(fc, fd)
    better = fcand >= top
    s_star = np.where(better, cand, s_star)
    top = np.where(better, fcand, top)

    out = np.full(n, np.nan)
    ok = np.zeros(n, dtype=bool)
    dead = ~np.isfinite(top)
    out[dead] = -np.inf
    ok[dead] = True
    live = ~dead
    topc = np.where(live, top, 0.0)
    level = topc - 50.0
    lo, hi = bracket(topc, s_star)

    def crossing(a, b, above_at_b):
        for _ in range(64):
            m = 0.5 * (a + b)
            above = col(m) >= level
            if above_at_b:
                b, a = np.where(above, m, b), np.where(above, a, m)
            else:
                a, b = np.where(above, m, a), np.where(above, b, m)
        return 0.5 * (a + b)

    left = np.where(col(lo) < level, crossing(lo.copy(), s_star.copy(), True), lo)
    right = np.where(col(hi) < level, crossing(s_star.copy(), hi.copy(), False), hi)
    width = right - left
    short = live & ((width <= 1e-9 * (1.0 + np.abs(s_star))) | (np.abs(topc) > 1e12))
    with np.errstate(divide="ignore"):
        out[short] = topc[short] + np.log(np.maximum(width[short], 1e-300))
    ok[short] = True
    todo = live & ~short
    if np.any(todo):
        idx = np.nonzero(todo)[0]
        a, c, b = left[idx], s_star[idx], right[idx]
        cols = [a[:, None], c[:, None], b[:, None]]
        if breaks is not None:
            cols.append(np.clip(breaks(idx, a, b), a[:, None], b[:, None]))
        pts = np.sort(np.concatenate(cols, axis=1), axis=1)
        # the result is top + log I; judge the error of log I against |top|
        eff = np.maximum(
            tol * np.maximum(1.0, np.abs(topc[idx])),
            256.0 * np.finfo(float).eps * (1.0 + np.abs(topc[idx]) + np.abs(c)),
        )
        m0 = 32 if pts.shape[1] > 3 else 64
        rows = np.arange(idx.size)
        prev = None
        for m in (m0, 2 * m0, 4 * m0, 8 * m0):
            if rows.size == 0:
                break
            sub = idx[rows]
            tp = topc[sub][:, None]

            def f(x, sub=sub, tp=tp):
                with np.errstate(over="ignore", invalid="ignore"):
                    v = np.exp(phi(x, sub) - tp)
                return np.nan_to_num(v, nan=0.0)

            cur = np.zeros(rows.size)
            for j in range(pts.shape[1] - 1):
                cur += _gl_rows(f, pts[rows, j], pts[rows, j + 1], m)
            if prev is not None:
                with np.errstate(invalid="ignore"):
                    good = np.isfinite(cur) & (cur > 0) & (np.abs(cur - prev) <= eff[rows] * cur)
                with np.errstate(divide="ignore", invalid="ignore"):
                    out[sub[good]] = topc[sub[good]] + np.log(cur[good])
                ok[sub[good]] = True
                rows, cur = rows[~good], cur[~good]
            prev = cur
    return out, ok


def _wall_points(law, lN, shift, lo, hi, iters=60):
    """Per-row ``s`` where ``log N + lnlc(s - shift)`` crosses the wall levels, plus lnlc branch points."""
    lev = _WALL_LEVELS[None, :]
    a = np.repeat(lo[:, None], lev.shape[1], axis=1)
    b = np.repeat(hi[:, None], lev.shape[1], axis=1)
    ln, sh = lN[:, None], shift[:, None]
    for _ in range(iters):
        m = 0.5 * (a + b)
        with np.errstate(over="ignore", invalid="ignore"):
            above = ln + log_neg_log_cdf(law, m - sh) > lev
        a = np.where(above, m, a)
        b = np.where(above, b, m)
    br = np.asarray(_lnlc_breaks(law), dtype=float)[None, :] + sh
    return np.concatenate([0.5 * (a + b), br], axis=1)


def max_laplace_many(law, log_L, log_N, tol=1e-10):
    """Vectorised ``max_laplace`` over arrays of ``log L`` and ``log N``.

    When the transform is close to 1 it is computed as ``log(1 - J)`` with
    ``J = int_0^inf e^-y (1 - P(L|xi| <= y)^N) dy`` evaluated directly, so
    that tiny values keep their relative accuracy.  Rows whose fixed-panel
    quadrature does not settle are recomputed with the scalar routine.
    """
    lL = np.atleast_1d(np.asarray(log_L, dtype=float))
    lN = np.broadcast_to(np.asarray(log_N, dtype=float), lL.shape).copy()
    if law.alpha < 2.0:
        lc = math.log(stable_tail_constant(law.alpha))
        huge = frechet_ok(law.alpha, lL + (lN + lc) / law.alpha, lN)
        if np.any(huge):
            out = np.empty(lL.size)
            out[huge] = [max_laplace_frechet(law, a, b, tol) for a, b in zip(lL[huge], lN[huge])]
            if not np.all(huge):
                out[~huge] = max_laplace_many(law, lL[~huge], lN[~huge], tol)
            return out
    n = lL.size
    lLc, lNc = lL[:, None], lN[:, None]

    def phi(s, rows):
        with np.errstate(over="ignore", invalid="ignore"):
            v = s - np.exp(s) - np.exp(lNc[rows] + log_neg_log_cdf(law, s - lLc[rows]))
        return np.where(np.isnan(v), -np.inf, v)

    p0 = phi(np.zeros((n, 1)), np.arange(n))[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        s_up = np.where(np.isfinite(p0), np.minimum(745.0, np.log(np.abs(p0) + 10.0) + 1.0), 745.0)

    def bracket(top, s_star):
        return np.minimum(-1.0, top - 70.0), np.maximum(s_star + 1.0, np.log(np.abs(top) + 70.0) + 1.0)

    out, ok = _row_peak_integrals(
        phi, np.zeros(n), s_up, bracket, tol,
        breaks=lambda rows, a, b: _wall_points(law, lN[rows], lL[rows], a, b),
    )

    near = ok & (out > -0.5)
    if np.any(near):
        idx = np.nonzero(near)[0]
        jL, jN = lL[idx][:, None], lN[idx][:, None]

        def chi(t, rows):
            # t = log r; integrand of int e^(t - L e^t) (1 - F(e^t)^N) dt
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                x = np.exp(jN[rows] + log_neg_log_cdf(law, t))
                v = t - np.exp(jL[rows] + t) + np.log(-np.expm1(-x))
            return np.where(np.isnan(v), -np.inf, v)

        g_hi = -lL[idx] + 5.0

        def jbracket(top, t_star):
            return t_star - 70.0, np.maximum(t_star + 1.0, -lL[idx] + np.log(np.abs(top) + 70.0) + 1.0)

        lj, jok = _row_peak_integrals(
            chi, np.full(idx.size, -40.0), np.maximum(g_hi, -35.0), jbracket, tol,
            breaks=lambda rows, a, b: _wall_points(law, lN[idx][rows], np.zeros(rows.size), a, b),
        )
        lj = lj + lL[idx]
        use = jok & (lj < math.log(0.5))
        with np.errstate(divide="ignore"):
            out[idx[use]] = np.log1p(-np.exp(lj[use]))
        ok[idx[~use & ~jok]] = False
    for r in np.nonzero(~ok)[0]:
        out[r] = _max_laplace_adaptive(law, float(lL[r]), float(lN[r]), tol=tol)
    return out


FRECHET_MARGIN = 36.0


def frechet_ok(alpha, log_x, log_N):
    """Where the Frechet limit of the maximum is accurate to about ``e^-36``.

    The Laplace integral ``int e^-y exp(-x y^-a)`` peaks near
    ``y* = (a x)^(1/(1+a))``, i.e. at a maximum ``M* = (cN/y*)^(1/alpha)``;
    the tail expansion of ``P(|xi| > m)`` has relative error
    ``O(m^-alpha)``, so require ``log cN - log y*`` above the margin.
    """
    a = 1.0 / alpha
    lys = np.maximum(0.0, (math.log(a) + np.asarray(log_x, dtype=float)) / (1.0 + a))
    return np.asarray(log_N, dtype=float) + math.log(stable_tail_constant(alpha)) - lys > FRECHET_MARGIN


def stable_tail_constant(alpha):
    """``c`` with ``P(|xi| > r) ~ c r^-alpha`` as ``r -> inf``."""
    return 2.0 / math.pi * math.gamma(alpha) * math.sin(math.pi * alpha / 2.0)


def max_laplace_frechet(law, log_L, log_N, tol=1e-10):
    """``max_laplace`` for a stable law in the large-``N`` limit.

    With ``M = max of N`` copies, ``M / (cN)^(1/alpha)`` is Frechet and
    ``E exp(-L M) = int e^-y exp(-x y^(-1/alpha)) dy`` with
    ``x = L (cN)^(1/alpha)``.  The relative error is ``O(1/N)``.
    """
    lc = math.log(stable_tail_constant(law.alpha))
    return frechet_laplace(law.alpha, log_L + (log_N + lc) / law.alpha, tol)


def frechet_laplace(alpha, log_x, tol=1e-10):
    """``log int_0^inf e^-y exp(-x y^(-1/alpha)) dy`` from ``log x``.

    Values near 0 are returned as ``log(1 - J)`` with ``J`` integrated
    directly, so tiny loads keep their relative accuracy.
    """
    a = 1.0 / alpha
    lx = float(log_x)
    if lx > 0.0:
        return laplace_integral_heavy(math.exp(lx), a, tol)

    def g(s):
        # J integrand in s = log y
        return math.exp(s - math.exp(s)) * -math.expm1(-math.exp(lx - a * s))

    s0 = lx / a
    lo = min(s0, 0.0) - 60.0
    parts = [(lo, s0), (s0, 0.0), (0.0, 5.0)] if s0 < 0 else [(lo, 0.0), (0.0, 5.0)]
    J = sum(integrate.quad(g, u, v, epsabs=0.0, epsrel=tol, limit=200)[0] for u, v in parts if v > u)
    if J < 0.5:
        return math.log1p(-J)
    return laplace_integral_heavy(math.exp(lx), a, tol)


FRECHET_TABLE = (-300.0, 80.0, 0.05)


@lru_cache(maxsize=None)
def _frechet_spline(alpha):
    lo, hi, h = FRECHET_TABLE
    g = np.arange(lo, hi + h / 2, h)
    y = np.log([-frechet_laplace(alpha, x) for x in g])
    return interpolate.CubicSpline(g, y)


def frechet_laplace_many(alpha, log_x):
    """Vectorised ``frechet_laplace`` from a spline of ``log(-value)`` in ``log x``.

    The table is built once per ``alpha`` (about 2 s); points outside it
    use the scalar routine.
    """
    lx = np.atleast_1d(np.asarray(log_x, dtype=float))
    lo, hi, _ = FRECHET_TABLE
    inside = (lx >= lo) & (lx <= hi)
    out = np.empty(lx.shape)
    if np.any(inside):
        out[inside] = -np.exp(_frechet_spline(float(alpha))(lx[inside]))
    for i in np.nonzero(~inside)[0]:
        out[i] = frechet_laplace(alpha, lx[i])
    return out


def max_laplace_n1_gaussian(L):
    """Closed form ``log E exp(-L |xi|) = log(2 exp(L^2/2) Phi(-L))``."""
    return LOG2 + 0.5 * L * L + float(special.log_ndtr(-L))


def saddle_constant(alpha):
    """``C_alpha`` with ``min_y (y + L y^-alpha) = C_alpha L^(1/(1+alpha))``."""
    return alpha ** (1.0 / (1.0 + alpha)) + alpha ** (-alpha / (1.0 + alpha))


def laplace_integral_heavy(L, alpha, tol=1e-10):
    """``log int_0^inf exp(-y - L y^-alpha) dy``."""
    if L < 0:
        raise ValueError("L must be non-negative")
    if L == 0:
        return 0.0
    log_L = math.log(L)

    def phi(s):
        with np.errstate(over="ignore"):
            return s - np.exp(s) - np.exp(log_L - alpha * s)

    # phi is concave; its peak solves 1 - e^s + alpha L e^(-alpha s) = 0
    def dphi(s):
        return 1.0 - math.exp(s) + math.exp(math.log(alpha) + log_L - alpha * s)

    lo, hi = -1.0, 1.0
    while dphi(lo) <= 0:
        lo *= 2.0
    while dphi(hi) >= 0:
        hi *= 2.0
    s_star = optimize.brentq(dphi, lo, hi, xtol=1e-13)
    top = float(phi(np.array([s_star]))[0])
    a, b = s_star - 1.0, s_star + 1.0
    while float(phi(np.array([a]))[0]) > top - 60.0:
        a -= 2.0 * (s_star - a)
    while float(phi(np.array([b]))[0]) > top - 60.0:
        b += 2.0 * (b - s_star)
    return _log_peak_integral(phi, s_star, a, b, tol)


# ---------------------------------------------------------------------------
# regime envelopes for the Gaussian max-Laplace transform

REGIMES = ("small_L", "many", "balanced", "few")
# calibration box in (log10 L, log10 N)
REGIME_BOX = ((-4.0, 4.0), (0.0, 8.0))


def max_laplace_regime(L, N):
    """Regime of ``(L, N)``: fixed partition, checked in this order.

    ``L < 1``: small_L; ``2L <= N``: many; ``L >= 2N``: few; else balanced.
    """
    if L < 1.0:
        return "small_L"
    if 2.0 * L <= N:
        return "many"
    if L >= 2.0 * N:
        return "few"
    return "balanced"


def regime_shape(L, N):
    """Shape function of the envelope for ``-log max_laplace``."""
    reg = max_laplace_regime(L, N)
    if reg == "small_L":
        # L sqrt(log N) for large N; the +1 keeps N near 1 finite
        return L * math.sqrt(1.0 + math.log(N))
    if reg == "many":
        return L * math.sqrt(math.log(N / L))
    if reg == "few":
        return N * math.log(L / N)
    return L


def _grid_points(n_side):
    (a0, a1), (b0, b1) = REGIME_BOX
    pts = []
    for u in np.linspace(a0, a1, n_side):
        for v in np.linspace(b0, b1, n_side):
            pts.append((10.0**u, 10.0**v))
    return pts


@lru_cache(maxsize=None)
def regime_constants():
    """Fitted ``(c_lower, c_upper)`` per regime on the calibration grid.

    ``c_lower = 0.8 min`` and ``c_upper = 1.25 max`` of the ratio
    ``-log max_laplace / shape`` over grid points in that regime.
    """
    g = Law.gaussian()
    ratios = {r: [] for r in REGIMES}
    # extra points hug the regime boundaries
    pts = _grid_points(25)
    for L in (0.999, 1.0, 1.001, 1.5, 3.0, 30.0, 300.0):
        for f in (0.5, 0.51, 1.0, 1.99, 2.0, 2.01):
            pts.append((L, max(1.0, L * f)))
    vals = max_laplace_many(g, np.log([L for L, _ in pts]), np.log([N for _, N in pts]))
    for (L, N), v in zip(pts, vals):
        ratios[max_laplace_regime(L, N)].append(-v / regime_shape(L, N))
    return {r: (0.8 * float(min(v)), 1.25 * float(max(v))) for r, v in ratios.items()}


def max_laplace_regime_bounds(L, N):
    """Envelope ``(lower, upper)`` for ``-log E exp(-L max_N |xi|)``, Gaussian."""
    c_lo, c_hi = regime_constants()[max_laplace_regime(L, N)]
    s = regime_shape(L, N)
    return c_lo * s, c_hi * s


# ---------------------------------------------------------------------------
# sampling


def sample(law, rng, size=None):
    """Draws of ``xi``; stable via Chambers-Mallows-Stuck."""
    if law.is_gaussian:
        return law.scale * rng.standard_normal(size)
    a = law.alpha
    v = rng.uniform(-HALF_PI, HALF_PI, size)
    if a == 1.0:
        return np.tan(v)
    w = rng.standard_exponential(size)
    return np.sin(a * v) / np.cos(v) ** (1.0 / a) * (np.cos((1.0 - a) * v) / w) ** ((1.0 - a) / a)


def log_max_abs_quantile(law, log_N, u):
    """``log`` of the quantile transform for ``max`` of ``N`` i.i.d. ``|xi|`` at uniforms ``u``.

    Solves ``N log P(|xi| <= m) = log u`` by bisection in ``log m``, which
    keeps the result monotone in both ``u`` and ``log_N``.
    """
    u = np.asarray(u, dtype=float)
    log_N = np.broadcast_to(np.asarray(log_N, dtype=float), u.shape)
    with np.errstate(divide="ignore"):
        target = np.log(-np.log(u)) - log_N
    lo = np.full(u.shape, -800.0)
    # stable tails put the root near log_N / alpha
    hi = np.full(u.shape, 800.0) + np.maximum(log_N, 0.0) / law.alpha
    for _ in range(64 + int(np.log2(max(1.0, float(np.max(hi, initial=800.0)) / 800.0)))):
        mid = 0.5 * (lo + hi)
        go_right = log_neg_log_cdf(law, mid) > target
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    return 0.5 * (lo + hi)


def max_abs_quantile(law, log_N, u):
    """Quantile transform for ``max`` of ``N`` i.i.d. ``|xi|``; see ``log_max_abs_quantile``."""
    with np.errstate(over="ignore"):
        return np.exp(log_max_abs_quantile(law, log_N, u))


def sample_max_abs(law, log_N, rng, size=None):
    """Draws of ``max`` over ``floor(e^log_N)`` i.i.d. copies of ``|xi|``.

    ``log_N`` is treated as a real exponent; callers pass ``log floor(N)``.
    """
    u = rng.random(size)
    # u = 0 has probability zero but would give an infinite target
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    return max_abs_quantile(law, log_N, u)
