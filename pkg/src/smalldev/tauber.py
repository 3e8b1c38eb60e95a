"""Laplace-transform asymptotics versus small deviation asymptotics.

Symbolic side: exponent arithmetic for rates of the form
``c * x^a * |log x|^b * (log|log x|)^d``.  Numeric side: exponential
Chebyshev upper bounds and the elementary lower bound
``P(V <= eps) >= E exp(-lam V) - exp(-lam eps)``.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

DEPTHS = ("log_p", "loglog_p", "logloglog_p")
VARIABLES = ("eps", "lambda")


@dataclass(frozen=True)
class AsymptoticExpr:
    """Magnitude of an iterated logarithm, up to constants.

    With ``variable == "eps"`` and ``depth == "log_p"`` this reads
    ``-log P(V <= eps) ~ c eps^-a |log eps|^b (log|log eps|)^d``; deeper
    depths apply one or two more logarithms to ``-log P``.  With
    ``variable == "lambda"`` it describes ``-log E exp(-lam V)`` (or its
    iterated logarithms) as ``c lam^a (log lam)^b (log log lam)^d``.
    ``c is None`` marks an unknown constant.
    """

    depth: str = "log_p"
    variable: str = "eps"
    a: float = 0.0
    b: float = 0.0
    d: float = 0.0
    c: float | None = None

    def __post_init__(self):
        if self.depth not in DEPTHS:
            raise ValueError(f"unknown depth {self.depth!r}")
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown variable {self.variable!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def log_magnitude(self, x):
        """``log`` of the described magnitude at ``x`` (``eps`` or ``lam``); ``c`` taken as 1 if unknown."""
        lx = math.log(x)
        if self.variable == "eps":
            lx = -lx
        c = 1.0 if self.c is None else self.c
        out = math.log(c) + self.a * lx
        if self.b:
            out += self.b * math.log(abs(lx))
        if self.d:
            out += self.d * math.log(math.log(abs(lx)))
        return out


class ShapeMismatch(ValueError):
    """The expression is not of a shape the conversion handles."""


def taub_convert(expr):
    """Map a log-Laplace rate with ``a = 1`` to the small deviation side.

    ``lam (log lam)^-tau (log log lam)^theta`` with ``tau > 0`` becomes
    ``log|log P| ~ eps^(-1/tau) |log eps|^(theta/tau)``;
    ``lam (log log lam)^-theta`` with ``theta > 0`` becomes
    ``log log|log P| ~ eps^(-1/theta)``.  Constants do not transfer.
    """
    if expr.variable != "lambda" or expr.depth != "log_p" or expr.a != 1.0:
        raise ShapeMismatch("expected -log E exp(-lam V) ~ lam (log lam)^b (log log lam)^d")
    tau, theta = -expr.b, expr.d
    if tau > 0:
        return AsymptoticExpr("loglog_p", "eps", a=1.0 / tau, b=theta / tau)
    if tau == 0 and theta < 0:
        return AsymptoticExpr("logloglog_p", "eps", a=-1.0 / theta)
    raise ShapeMismatch(f"no small deviation counterpart for tau={tau}, theta={theta}")


def taub_invert(expr):
    """Inverse of ``taub_convert`` on exponents."""
    if expr.variable != "eps":
        raise ShapeMismatch("expected an eps-side expression")
    if expr.depth == "loglog_p" and expr.a > 0 and expr.d == 0:
        tau = 1.0 / expr.a
        return AsymptoticExpr("log_p", "lambda", a=1.0, b=-tau, d=expr.b * tau)
    if expr.depth == "logloglog_p" and expr.a > 0 and expr.b == 0 and expr.d == 0:
        return AsymptoticExpr("log_p", "lambda", a=1.0, b=0.0, d=-1.0 / expr.a)
    raise ShapeMismatch("expression is not in the image of taub_convert")


def debruijn_constant(p, C):
    """``C'`` with ``-log P(V <= eps) ~ C' eps^(-p/(1-p))`` from ``-log E e^{-lam V} ~ C lam^p``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return (1.0 - p) * p ** (p / (1.0 - p)) * C ** (1.0 / (1.0 - p))


def debruijn_convert(expr):
    """``-log E e^{-lam V} ~ C lam^p (log lam)^q`` to the ``eps`` side.

    Gives ``C' eps^(-p/(1-p)) |log eps|^(q/(1-p))``.  The log factor
    contributes ``(1-p)^(-q/(1-p))`` to the constant since
    ``log lam* ~ |log eps|/(1-p)`` at the optimising ``lam*``.
    """
    if expr.variable != "lambda" or expr.depth != "log_p" or expr.d != 0:
        raise ShapeMismatch("expected -log E exp(-lam V) ~ C lam^p (log lam)^q")
    p, q = expr.a, expr.b
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    c = None
    if expr.c is not None:
        c = debruijn_constant(p, expr.c) * (1.0 - p) ** (-q / (1.0 - p))
    return AsymptoticExpr("log_p", "eps", a=p / (1.0 - p), b=q / (1.0 - p), c=c)


# ---------------------------------------------------------------------------
# numeric conversions


class NoBound:
    """Sentinel: the lower-bound inequality was not informative on the grid."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NoBound"

    def __bool__(self):
        return False


NO_BOUND = NoBound()

PER_DECADE = 64


def _grid(lo, hi, per_decade=PER_DECADE):
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def _extend_and_optimize(objective, lo, hi, maximize, max_decades, floor=None, per_decade=PER_DECADE, refine=True):
    """Discrete optimum on a geometric grid, extended until interior, then (optionally) refined."""
    sign = -1.0 if maximize else 1.0

    def f(lam):
        v = objective(lam)
        return math.inf if v is None or math.isnan(v) else sign * v

    lam = list(_grid(lo, hi, per_decade))
    vals = [f(x) for x in lam]
    grown = 0
    while grown < max_decades:
        i = int(np.argmin(vals))
        # nothing informative yet: larger lam sharpens both inequalities
        if i == len(lam) - 1 or not math.isfinite(vals[i]):
            new = list(_grid(lam[-1], lam[-1] * 10.0, per_decade))[1:]
            lam += new
            vals += [f(x) for x in new]
        elif i == 0 and (floor is None or lam[0] > floor):
            new = list(_grid(lam[0] / 10.0, lam[0], per_decade))[:-1]
            lam = new + lam
            vals = [f(x) for x in new] + vals
        else:
            break
        grown += 1
    i = int(np.argmin(vals))
    best_lam, best = lam[i], vals[i]
    if refine and 0 < i < len(lam) - 1 and math.isfinite(best):
        res = optimize.minimize_scalar(
            lambda t: min(f(math.exp(t)), 1e300), bounds=(math.log(lam[i - 1]), math.log(lam[i + 1])),
            method="bounded", options={"xatol": 1e-9},
        )
        if res.fun < best:
            best_lam, best = math.exp(res.x), float(res.fun)
    return float(best_lam), float(sign * best)


def chebyshev_upper(eps, laplace_fn, lambda_range=None, max_decades=40, per_decade=PER_DECADE, refine=True):
    """Upper bound ``min_lam (lam eps + log E exp(-lam V))`` on ``log P(V <= eps)``.

    ``laplace_fn(lam)`` must return the log-Laplace transform or an upper
    bound of it.  Every ``lam`` gives a valid bound; ``refine=False`` skips
    the continuous polish of the best grid point.  Returns
    ``(bound, lam_at_min)``.
    """
    lo, hi = lambda_range or (1e-2 / eps, 1e2 / eps)
    lam, val = _extend_and_optimize(
        lambda t: t * eps + laplace_fn(t), lo, hi, False, max_decades, per_decade=per_decade, refine=refine,
    )
    return min(val, 0.0), lam


def laplace_to_prob_lower(eps, laplace_lower_fn, lambda_range=None, max_decades=40, per_decade=PER_DECADE):
    """Lower bound ``max_lam log(E e^{-lam V} - e^{-lam eps})`` on ``log P(V <= eps)``.

    ``laplace_lower_fn(lam)`` must return a lower bound of the log-Laplace
    transform.  Returns ``(bound, lam)`` or ``(NO_BOUND, None)``.
    """

    def obj(lam):
        a = laplace_lower_fn(lam)
        c = -lam * eps
        if a <= c:
            return -math.inf
        # log(e^a - e^c) = a + log(1 - e^(c-a))
        return a + math.log(-math.expm1(c - a))

    lo, hi = lambda_range or (1e-2 / eps, 1e2 / eps)
    if lambda_range is None and not math.isfinite(obj(hi)):
        # informative lam form an up-set when the log-Laplace bound is
        # convex; bracket the threshold by squaring, then bisect in log lam
        a, b = math.log(hi), None
        step = 1.0
        while a + step < 690.0:
            if math.isfinite(obj(math.exp(a + step))):
                b = a + step
                break
            a, step = a + step, 2.0 * step
        if b is None:
            if not math.isfinite(obj(math.exp(690.0))):
                return NO_BOUND, None
            b = 690.0
        for _ in range(24):
            m = 0.5 * (a + b)
            if math.isfinite(obj(math.exp(m))):
                b = m
            else:
                a = m
        lo, hi = math.exp(b), math.exp(b) * 1e3
    lam, val = _extend_and_optimize(obj, lo, hi, True, max_decades, per_decade=per_decade)
    if not math.isfinite(val):
        return NO_BOUND, None
    return val, lam
