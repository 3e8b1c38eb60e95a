"""Entropy majorants ``Psi`` of covering numbers and their integral transforms.

Profiles are evaluated in log coordinates: ``log_psi(p, log_eps)``.  The
parametric families are

* ``polynomial``      ``Psi = C eps^-gamma``
* ``log_power``       ``Psi = C |log eps|^beta``
* ``exp_log_power``   ``Psi = C exp(A |log eps|^alpha_hat)``
* ``critical_stable`` ``Psi = C eps^-alpha |log eps|^-beta``
* ``exp_poly_log``    ``log Psi = C eps^-gamma |log eps|^-beta``
* ``tabulated``       log-log linear interpolation of user pairs

and every profile is 1 from its diameter ``sigma`` on.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .tauber import AsymptoticExpr

FAMILIES = ("polynomial", "log_power", "exp_log_power", "critical_stable", "exp_poly_log", "tabulated")
LOG2 = math.log(2.0)


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class IngestionError(ValueError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class Divergent:
    """Sentinel for an infinite integral."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "Divergent"

    def __bool__(self):
        return False


DIVERGENT = Divergent()


@dataclass(frozen=True)
class EntropyProfile:
    family: str
    sigma: float = 1.0
    C: float = 1.0
    gamma: float = 0.0
    beta: float = 0.0
    alpha: float = 0.0
    A: float = 0.0
    alpha_hat: float = 0.0
    # tabulated knots, increasing in log eps
    knots_log_eps: tuple = field(default=(), repr=False)
    knots_log_psi: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.sigma > 0 or not self.C > 0:
            raise ValueError("sigma and C must be positive")

    @property
    def log_sigma(self):
        return math.log(self.sigma)

    def to_dict(self):
        d = {"family": self.family, "sigma": self.sigma, "C": self.C}
        for k in ("gamma", "beta", "alpha", "A", "alpha_hat"):
            if getattr(self, k):
                d[k] = getattr(self, k)
        if self.family == "tabulated":
            d["pairs"] = [[math.exp(x), math.exp(y)] for x, y in zip(self.knots_log_eps, self.knots_log_psi)]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("family") == "tabulated":
            if "csv" in d:
                return read_profile_csv(d["csv"])
            return ingest_tabulated(d["pairs"])
        return cls(**d)


def polynomial(gamma, C=1.0, sigma=1.0):
    return EntropyProfile("polynomial", sigma, C, gamma=gamma)


def log_power(beta, C=1.0, sigma=1.0):
    return EntropyProfile("log_power", sigma, C, beta=beta)


def exp_log_power(A, alpha_hat, C=1.0, sigma=1.0):
    if not 0 < alpha_hat < 1:
        raise ValueError("alpha_hat must lie in (0, 1)")
    return EntropyProfile("exp_log_power", sigma, C, A=A, alpha_hat=alpha_hat)


def critical_stable(alpha, beta, C=1.0, sigma=1.0):
    return EntropyProfile("critical_stable", sigma, C, alpha=alpha, beta=beta)


def exp_poly_log(gamma, beta, C=1.0, sigma=1.0):
    return EntropyProfile("exp_poly_log", sigma, C, gamma=gamma, beta=beta)


def ingest_tabulated(pairs):
    """Profile from ``(eps, psi)`` pairs (any order of rows).

    Rejects non-positive values, ``psi < 1`` and non-monotone data, naming
    the first offending row.  ``sigma`` is the smallest ``eps`` with
    ``psi == 1``, or the largest ``eps`` when no such row exists.
    """
    pairs = [(float(e), float(v)) for e, v in pairs]
    if len(pairs) < 2:
        raise IngestionError("need at least two (eps, psi) pairs")
    for i, (e, v) in enumerate(pairs):
        if not (e > 0 and v > 0):
            raise IngestionError(f"row {i}: eps and psi must be positive", i)
        if v < 1:
            raise IngestionError(f"row {i}: psi < 1 violates psi >= 1", i)
    order = sorted(range(len(pairs)), key=lambda i: -pairs[i][0])
    for j in range(1, len(order)):
        (e0, v0), (e1, v1) = pairs[order[j - 1]], pairs[order[j]]
        if e1 == e0:
            raise IngestionError(f"row {order[j]}: duplicate eps", order[j])
        if v1 < v0:
            raise IngestionError(f"row {order[j]}: psi increases with eps", order[j])
    ones = [e for e, v in pairs if v == 1.0]
    sigma = min(ones) if ones else max(e for e, _ in pairs)
    pts = sorted((math.log(e), math.log(v)) for e, v in pairs if e <= sigma)
    if len(pts) < 2:
        raise IngestionError("need at least two rows at or below the diameter")
    x, y = zip(*pts)
    return EntropyProfile("tabulated", sigma, 1.0, knots_log_eps=tuple(x), knots_log_psi=tuple(y))


def read_profile_csv(path):
    """Read a tabulated profile from CSV with header ``eps,psi``."""
    with open(path, newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = [h.strip() for h in next(reader)]
        if header != ["eps", "psi"]:
            raise IngestionError(f"expected header eps,psi, got {','.join(header)}")
        rows = [(float(a), float(b)) for a, b in reader]
    return ingest_tabulated(rows)


# ---------------------------------------------------------------------------
# evaluation


def _raw_log_psi(p, x):
    """Family formula for ``log Psi`` at ``x = log eps < log sigma``."""
    x = np.asarray(x, dtype=float)
    lc = math.log(p.C)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ax = np.abs(x)
        if p.family == "polynomial":
            return lc - p.gamma * x
        if p.family == "log_power":
            return lc + p.beta * np.log(ax)
        if p.family == "exp_log_power":
            return lc + p.A * ax**p.alpha_hat
        if p.family == "critical_stable":
            return lc - p.alpha * x - p.beta * np.log(ax)
        if p.family == "exp_poly_log":
            return np.exp(lc - p.gamma * x - p.beta * np.log(ax))
        # tabulated: interpolate, extrapolate the last segment below the table
        kx, ky = np.array(p.knots_log_eps), np.array(p.knots_log_psi)
        inner = np.interp(x, kx, ky)
        slope = (ky[1] - ky[0]) / (kx[1] - kx[0])
        return np.where(x < kx[0], ky[0] + slope * (x - kx[0]), inner)


def _linear_part(p):
    """Slope ``k`` with ``log Psi(x) - k x`` slowly varying as ``x -> -inf``."""
    if p.family == "polynomial":
        return -p.gamma
    if p.family == "critical_stable":
        return -p.alpha
    if p.family == "tabulated":
        kx, ky = p.knots_log_eps, p.knots_log_psi
        return (ky[1] - ky[0]) / (kx[1] - kx[0])
    return 0.0


def _log_psi_remainder(p, x):
    """``log Psi(x) - k x`` below sigma, computed without cancellation."""
    x = np.asarray(x, dtype=float)
    lc = math.log(p.C)
    with np.errstate(divide="ignore"):
        if p.family == "polynomial":
            return np.full_like(x, lc)
        if p.family == "critical_stable":
            return lc - p.beta * np.log(np.abs(x))
    if p.family == "tabulated":
        kx, ky = p.knots_log_eps, p.knots_log_psi
        k = _linear_part(p)
        return np.where(x < kx[0], ky[0] - k * kx[0], _raw_log_psi(p, x) - k * x)
    return _raw_log_psi(p, x)


def log_psi(p, log_eps):
    """``log Psi(eps)``; 0 for ``eps >= sigma``."""
    x = np.asarray(log_eps, dtype=float)
    out = np.where(x >= p.log_sigma, 0.0, _raw_log_psi(p, np.minimum(x, p.log_sigma)))
    return out if out.ndim else float(out)


def eval_profile(p, eps):
    """``Psi(eps)``; 1 for ``eps >= sigma``."""
    if np.any(np.asarray(eps) <= 0):
        raise ValueError("eps must be positive")
    with np.errstate(over="ignore"):
        out = np.exp(log_psi(p, np.log(eps)))
    return out if np.ndim(out) else float(out)


class UnboundedProfile(ValueError):
    """The family formula has no finite non-increasing majorant below sigma."""


def log_psi_majorant(p, log_eps):
    """Smallest non-increasing majorant of ``max(1, Psi)``, in log form.

    The parametric families are quasi-convex in ``log eps``, so the running
    maximum over ``[eps, sigma)`` is the larger of the two endpoint values.
    """
    x = np.asarray(log_eps, dtype=float)
    ls = p.log_sigma
    if p.family == "tabulated":
        out = np.maximum(0.0, log_psi(p, x))
        return out if out.ndim else float(out)
    edge = float(_raw_log_psi(p, np.nextafter(ls, -np.inf)))
    # a |log eps|^-beta factor with sigma = 1 blows up at sigma; it shows as
    # growth over the last 1e-6 of log eps that no smooth formula has
    near = float(_raw_log_psi(p, ls - 1e-6))
    if not math.isfinite(edge) or edge > near + 1.0:
        raise UnboundedProfile(f"{p.family} formula is unbounded just below sigma={p.sigma}")
    raw = _raw_log_psi(p, np.minimum(x, ls))
    out = np.where(x >= ls, 0.0, np.maximum(0.0, np.maximum(raw, edge)))
    return out if out.ndim else float(out)


def is_monotone_below_sigma(p):
    """Whether the family formula itself is non-increasing and >= 1 on ``(0, sigma)``."""
    x = p.log_sigma - np.geomspace(1e-6, 1e3, 400)
    v = log_psi(p, x)
    with np.errstate(invalid="ignore"):
        steps = np.nan_to_num(np.diff(v[::-1]), nan=0.0)
    return bool(np.all(steps <= 1e-12) and np.all(v >= -1e-12))


# ---------------------------------------------------------------------------
# integral transforms


def _log_integral_from(f_log, x0, x1, tol, split=True):
    """``log int_{x0}^{x1} exp(f_log(x)) dx`` for a log-integrand peaked near an end."""
    top = max(float(f_log(x0)), float(f_log(x1)))
    if not math.isfinite(top):
        return top
    width = x1 - x0
    # breakpoints at unit-ish distances from the left end, where mass sits
    pts = [x0 + d for d in (0.5, 2.0, 8.0, 32.0, 128.0) if d < width] if split else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(
            lambda x: math.exp(float(f_log(x)) - top), x0, x1, points=pts or None,
            epsabs=0.0, epsrel=tol, limit=400,
        )
    if val <= 0:
        raise QuadratureError("integral vanished numerically", achieved=None)
    if err > 10 * tol * val:
        raise QuadratureError("quadrature did not converge", achieved=err / val)
    return top + math.log(val)


def log_psi_tilde(p, eps, tol=1e-8):
    """``log`` of the transform ``int_eps^sigma Psi(u)/u du`` (``Psi(eps)`` when ``eps >= sigma/2``)."""
    if not 0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x0 = math.log(eps)
    if eps >= p.sigma / 2:
        return float(log_psi(p, x0))
    # substitute u = e^x: the integrand becomes Psi(e^x) dx
    return _log_integral_from(lambda x: log_psi(p, x), x0, p.log_sigma, tol)


def psi_tilde(p, eps, tol=1e-8):
    return math.exp(log_psi_tilde(p, eps, tol))


CELL_DECAY = 1.0 - 1e-6
CELL_RUN = 8


def psi_hat(p, eps, alpha, tol=1e-8, max_cells=2000):
    """``int_0^eps (Psi(u)/u)^(1/(alpha+1)) du``, or ``DIVERGENT``.

    Integrates in ``t = log(eps/u)`` over cells ``[0,w], [w,2w], [2w,4w], ...``
    with ``w = max(1, |log eps|)``, so that slowly varying factors in
    ``|log u|`` have settled by the second cell.  The integral is declared
    divergent when eight consecutive cells fail to shrink.  Once a cell is
    below ``tol`` of the total, a geometric tail is added for the remainder.
    """
    if not 0 < eps <= p.sigma:
        raise ValueError("need 0 < eps <= sigma")
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    x0 = math.log(eps)
    q = 1.0 / (alpha + 1.0)
    # log integrand = slope * x + q * remainder(x), with the exact slope
    slope = q * _linear_part(p) + 1.0 - q

    def f_log(t):
        x = x0 - t
        if x >= p.log_sigma:
            return (1.0 - q) * x
        return slope * x + q * float(_log_psi_remainder(p, x))

    w = max(1.0, abs(x0))
    edges = [0.0, w]
    log_cells = []
    run = 0
    while len(log_cells) < max_cells:
        a, b = edges[-2], edges[-1]
        fa, fb = f_log(a), f_log(b)
        if fb > fa + 40.0:
            # integrand rising steeply within a doubling cell: cells grow
            lc = fb
        else:
            lc = _log_integral_from(f_log, a, b, min(tol, 1e-6), split=len(log_cells) == 0)
        log_cells.append(lc)
        if lc == math.inf:
            return DIVERGENT
        if len(log_cells) >= 2:
            step = log_cells[-1] - log_cells[-2]
            run = run + 1 if step >= math.log(CELL_DECAY) else 0
            if run >= CELL_RUN:
                return DIVERGENT
            lt = np.logaddexp.reduce(log_cells)
            if step < 0 and log_cells[-1] - lt < math.log(tol):
                ratio = math.exp(step)
                tail = math.exp(log_cells[-1] - lt) * ratio / (1.0 - ratio)
                return math.exp(lt) * (1.0 + tail)
        if b > 1e300:
            break
        edges.append(2.0 * b)
    raise QuadratureError("psi_hat cells did not settle", achieved=None)


# ---------------------------------------------------------------------------
# regularity and classification


@dataclass(frozen=True)
class RegularityReport:
    """Doubling ratios ``Psi(eps/2)/Psi(eps)`` on ``eps = sigma 2^-j``.

    ``c1_best``/``c2_best`` are the grid min/max; ``c1_inf``/``c2_sup``
    also include the analytic limit as ``eps -> 0`` (``inf`` when the ratio
    grows without bound).
    """

    c1_best: float
    c2_best: float
    grid: tuple
    c1_limit: float
    c2_limit: float
    monotone: bool

    @property
    def c1_inf(self):
        return min(self.c1_best, self.c1_limit)

    @property
    def c2_sup(self):
        return max(self.c2_best, self.c2_limit)

    def to_dict(self):
        return {
            "c1_best": self.c1_best, "c2_best": self.c2_best, "c1_limit": self.c1_limit,
            "c2_limit": self.c2_limit, "monotone": self.monotone, "grid_size": len(self.grid),
        }


def _ratio_limit(p):
    if p.family == "polynomial":
        return 2.0**p.gamma
    if p.family in ("log_power", "exp_log_power"):
        return 1.0
    if p.family == "critical_stable":
        return 2.0**p.alpha
    if p.family == "exp_poly_log":
        return math.inf if p.gamma > 0 or p.beta < 0 else 1.0
    kx, ky = p.knots_log_eps, p.knots_log_psi
    return 2.0 ** (-(ky[1] - ky[0]) / (kx[1] - kx[0]))


def regularity_report(p, j_max=40, j_min=1):
    if j_max - j_min < 2:
        raise ValueError("grid must cover at least two dyadic steps")
    j = np.arange(j_min, j_max + 1)
    x = p.log_sigma - j * LOG2
    with np.errstate(over="ignore", invalid="ignore"):
        r = np.exp(np.asarray(log_psi(p, x - LOG2)) - np.asarray(log_psi(p, x)))
    r = np.where(np.isnan(r), np.inf, r)
    lim = _ratio_limit(p)
    return RegularityReport(
        float(r.min()), float(r.max()), tuple(float(v) for v in np.exp(x)), lim, lim,
        is_monotone_below_sigma(p),
    )


THEOREMS = ("Thm1", "Thm2", "Thm3", "Thm4", "Thm5", "Thm8")


@dataclass(frozen=True)
class RegimeDecision:
    applicable: tuple
    reasons: dict
    predicted_rate: dict

    def to_dict(self):
        return {
            "applicable": list(self.applicable),
            "reasons": {k: {"holds": v[0], "why": v[1]} for k, v in self.reasons.items()},
            "predicted_rate": {k: (None if v is None else v.to_dict()) for k, v in self.predicted_rate.items()},
        }


def _tilde_rate(p):
    """Shape of the log-Psi-tilde rate for the families where it is explicit."""
    if p.family == "polynomial":
        return AsymptoticExpr("log_p", "eps", a=p.gamma)
    if p.family == "log_power":
        return AsymptoticExpr("log_p", "eps", b=p.beta + 1.0)
    if p.family == "critical_stable" and p.alpha > 0:
        return AsymptoticExpr("log_p", "eps", a=p.alpha, b=-p.beta)
    return None


def _critical_rate(law_alpha, beta):
    if beta < 1.0 + law_alpha:
        return AsymptoticExpr("log_p", "eps", a=1.0 / (beta / law_alpha - 1.0))
    if beta == 1.0 + law_alpha:
        return AsymptoticExpr("log_p", "eps", a=law_alpha, b=1.0 + law_alpha)
    return AsymptoticExpr("log_p", "eps", a=law_alpha, b=1.0 + law_alpha - beta)


def classify_regime(p, alpha, report=None):
    """Every theorem whose hypotheses hold for ``p`` with law index ``alpha``.

    ``alpha == 2`` is the Gaussian case.  Regularity constants include the
    analytic limit, so ``C2 < 2^alpha`` is checked strictly as ``eps -> 0``.
    """
    report = report or regularity_report(p)
    c1, c2 = report.c1_inf, report.c2_sup
    gauss = alpha == 2.0
    reasons, rate = {}, {}

    ok = c1 > 1 and math.isfinite(c2) and (gauss or c2 < 2.0**alpha)
    reasons["Thm1"] = (ok, f"C1={c1:.6g}>1, C2={c2:.6g} finite" + ("" if gauss else f" and < 2^alpha={2**alpha:.6g}"))
    rate["Thm1"] = AsymptoticExpr("log_p", "eps", a=p.gamma) if ok and p.family == "polynomial" else None

    ok = gauss and math.isfinite(c2)
    reasons["Thm2"] = (ok, "Gaussian with finite C2" if gauss else "requires the Gaussian case")
    rate["Thm2"] = _tilde_rate(p) if ok else None

    ok = gauss and p.family == "exp_poly_log" and (0 < p.gamma < 2 or (p.gamma == 2 and p.beta > 2))
    reasons["Thm3"] = (ok, "Gaussian, log Psi = C eps^-gamma |log eps|^-beta with gamma<2, or gamma=2 and beta>2")
    if ok and p.gamma < 2:
        g, b = p.gamma, p.beta
        rate["Thm3"] = AsymptoticExpr("loglog_p", "eps", a=2 * g / (2 - g), b=-2 * b / (2 - g))
    elif ok:
        rate["Thm3"] = AsymptoticExpr("logloglog_p", "eps", a=2.0 / (p.beta - 2.0))
    else:
        rate["Thm3"] = None

    ok = (not gauss) and 1 < c2 < 2.0**alpha
    reasons["Thm4"] = (ok, f"stable with 1 < C2={c2:.6g} < 2^alpha={2**alpha:.6g}" if not gauss else "stable only")
    rate["Thm4"] = _tilde_rate(p) if ok else None

    if gauss:
        reasons["Thm5"] = (False, "stable only")
        rate["Thm5"] = None
    else:
        ph = psi_hat(p, p.sigma, alpha) if c1 > 1 else None
        ok = c1 > 1 and ph is not DIVERGENT
        reasons["Thm5"] = (ok, f"C1={c1:.6g}>1 and psi_hat finite: {ph!r}")
        if ok and p.family == "critical_stable" and p.alpha == alpha:
            rate["Thm5"] = AsymptoticExpr("log_p", "eps", a=alpha, b=1.0 + alpha - p.beta)
        elif ok and p.family == "polynomial":
            rate["Thm5"] = AsymptoticExpr("log_p", "eps", a=p.gamma)
        else:
            rate["Thm5"] = None

    ok = (not gauss) and p.family == "critical_stable" and p.alpha == alpha and p.beta > max(1.0, alpha)
    reasons["Thm8"] = (ok, "Psi = C eps^-alpha |log eps|^-beta with beta > max(1, alpha)")
    rate["Thm8"] = _critical_rate(alpha, p.beta) if ok else None

    applicable = tuple(t for t in THEOREMS if reasons[t][0])
    return RegimeDecision(applicable, reasons, rate)


def boundedness_test(p, alpha):
    """``"Bounded"`` when a sufficient entropy condition holds, else ``"Unknown"``.

    Stable: finite ``psi_hat(sigma)`` under ``C1 > 1``, or the critical
    family with ``beta > max(1, alpha)``.  Gaussian: finite Dudley integral
    ``int_0^sigma sqrt(log Psi)``.
    """
    if alpha == 2.0:
        if p.family == "exp_poly_log":
            ok = p.gamma < 2 or (p.gamma == 2 and p.beta > 2)
        else:
            # sqrt(log Psi) is at most polylogarithmic for the other families
            ok = True
        return "Bounded" if ok else "Unknown"
    if p.family == "critical_stable" and p.alpha == alpha and p.beta > max(1.0, alpha):
        return "Bounded"
    if regularity_report(p).c1_inf > 1 and psi_hat(p, p.sigma, alpha) is not DIVERGENT:
        return "Bounded"
    return "Unknown"
