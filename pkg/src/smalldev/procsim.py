"""Example processes: exact oracles, Monte Carlo, and rate regression.

Three process families share one parametrisation:

* ``IndepSequence``: ``sup_n sigma_n |xi_n|``;
* ``SumOfMaxima``: ``S = sum_k sigma_k max_{i <= N_k} |xi_{k,i}|``;
* ``BinaryTree``: ``sup`` over prefixes ``a`` of ``|sum_{n <= |a|} sigma_n xi_{a_n}|``
  on the binary tree, one variable per edge.

All oracles and bounds are computed for the same depth-``D`` truncation
that the samplers draw from, so every comparison is between statements
about one and the same random variable.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from . import chainbound, dist1d, rng as rng_mod
from .tauber import AsymptoticExpr

LOG2 = math.log(2.0)
KINDS = ("IndepSequence", "SumOfMaxima", "BinaryTree")
SIGMA_RULES = ("power_log", "stable_critical", "tree_poly", "table")
LOGN_RULES = ("power_log", "dyadic", "ones", "table")
MAX_TREE_DEPTH = 28
LOG_PROB_MINUS_INFINITY = -math.inf


class WindowTooDeep(UserWarning):
    """The event is too rare for the sample size to resolve."""


# ---------------------------------------------------------------------------
# rules and specs


@dataclass(frozen=True)
class Rule:
    """Parametric sequence in log form, evaluable at real ``n >= 1``.

    sigma rules:
      ``power_log``       ``sigma_n = 2^(-n/gamma) n^(-beta/gamma)``
      ``stable_critical`` ``sigma_n = n^(-1/alpha) log(n+1)^(-beta/alpha)``
      ``tree_poly``       ``sigma_n = n^(-1/2-1/gamma) log(n+1)^(-beta/gamma)``
    log-N rules:
      ``power_log``       ``log N_k = 2^(gamma k) k^(-beta)``
      ``dyadic``          ``N_k = 2^k``
      ``ones``            ``N_k = 1``
    ``table`` holds explicit values (``sigma_n`` or ``log N_k``) for ``n = 1..len``.
    """

    kind: str
    gamma: float = 1.0
    beta: float = 0.0
    alpha: float = 1.0
    table: tuple = ()

    def log_sigma(self, n):
        if self.kind == "table":
            n = np.asarray(n, dtype=float)
            return np.log(np.asarray(self.table, dtype=float)[n.astype(int) - 1])
        return self.log_sigma_t(np.log(np.asarray(n, dtype=float)))

    def log_sigma_t(self, t):
        """``log sigma_n`` at ``n = e^t``; stays finite where ``n`` overflows."""
        t = np.asarray(t, dtype=float)
        g, b, a = self.gamma, self.beta, self.alpha
        with np.errstate(over="ignore"):
            n = np.exp(t)
        if self.kind == "table":
            return self.log_sigma(np.rint(n))
        ll = np.log(np.logaddexp(t, 0.0))  # log log(n + 1)
        if self.kind == "power_log":
            return -n * LOG2 / g - (b / g) * t
        if self.kind == "stable_critical":
            return -t / a - (b / a) * ll
        if self.kind == "tree_poly":
            return -(0.5 + 1.0 / g) * t - (b / g) * ll
        raise ValueError(f"unknown sigma rule {self.kind!r}")

    def log_n(self, k):
        with np.errstate(over="ignore", divide="ignore"):
            return np.exp(self.log_log_n(k))

    def log_log_n(self, k):
        """``log log N_k``; ``-inf`` when ``N_k = 1``."""
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            if self.kind == "table":
                return np.log(np.asarray(self.table, dtype=float)[k.astype(int) - 1])
            return self.log_log_n_t(np.log(k))

    def log_log_n_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "table":
            return self.log_log_n(np.rint(np.exp(t)))
        if self.kind == "power_log":
            with np.errstate(over="ignore"):
                return self.gamma * np.exp(t) * LOG2 - self.beta * t
        if self.kind == "dyadic":
            return t + math.log(LOG2)
        if self.kind == "ones":
            return np.full(t.shape, -np.inf)
        raise ValueError(f"unknown log-N rule {self.kind!r}")

    @property
    def length(self):
        return len(self.table) if self.kind == "table" else None

    def to_dict(self):
        d = asdict(self)
        d["table"] = list(self.table)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["table"] = tuple(d.get("table", ()))
        return cls(**d)


def law_to_dict(law):
    return {"alpha": law.alpha, "scale": law.scale}


def law_from_dict(d):
    return dist1d.Law(float(d.get("alpha", 2.0)), float(d.get("scale", 1.0)))


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    law: dist1d.Law
    sigma_rule: Rule
    logN_rule: Rule | None = None
    truncation_depth: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}")
        if self.sigma_rule.kind not in SIGMA_RULES:
            raise ValueError(f"unknown sigma rule {self.sigma_rule.kind!r}")
        if self.kind == "SumOfMaxima":
            if self.logN_rule is None or self.logN_rule.kind not in LOGN_RULES:
                raise ValueError("SumOfMaxima needs a log-N rule")
        if self.kind == "BinaryTree" and self.truncation_depth is not None:
            if self.truncation_depth > MAX_TREE_DEPTH:
                raise ValueError(f"tree depth above {MAX_TREE_DEPTH} is too costly")
        if self.sigma_rule.kind == "table" and self.sigma_rule.table:
            s = np.asarray(self.sigma_rule.table, dtype=float)
            if np.any(s <= 0) or np.any(np.diff(s) > 0):
                raise ValueError("sigma_n must be positive and non-increasing")

    def depth(self, depth=None):
        d = depth if depth is not None else self.truncation_depth
        lengths = [r.length for r in (self.sigma_rule, self.logN_rule) if r is not None and r.length is not None]
        if lengths:
            d = min(lengths) if d is None else min(d, *lengths)
        return d

    def log_sigma(self, n):
        return self.sigma_rule.log_sigma(n)

    def level_log_n(self, n):
        """Log multiplicity of level ``n``: ``log N_n`` or ``n log 2`` for trees."""
        with np.errstate(over="ignore", divide="ignore"):
            return np.exp(self.level_log_log_n(n))

    def level_log_load(self, n):
        """``log sigma_n + log N_n / alpha``, the log scale of the level maximum.

        For ``power_log`` scales with dyadic counts the two terms linear in
        ``n`` are combined before evaluation, so deep levels keep full
        precision.
        """
        n = np.asarray(n, dtype=float)
        sr, nr = self.sigma_rule, self.logN_rule
        alpha = self.law.alpha
        if self.kind == "SumOfMaxima" and sr.kind == "power_log" and nr.kind == "dyadic":
            return n * LOG2 * (1.0 / alpha - 1.0 / sr.gamma) - (sr.beta / sr.gamma) * np.log(n)
        return self.log_sigma(n) + self.level_log_n(n) / alpha

    def level_log_log_n(self, n):
        n = np.asarray(n, dtype=float)
        if self.kind == "SumOfMaxima":
            return self.logN_rule.log_log_n(n)
        with np.errstate(divide="ignore"):
            return self.level_log_log_n_t(np.log(n))

    def level_log_log_n_t(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "SumOfMaxima":
            return self.logN_rule.log_log_n_t(t)
        if self.kind == "BinaryTree":
            return t + math.log(LOG2)
        return np.full(t.shape, -np.inf)

    def log_sigma_t(self, t):
        return self.sigma_rule.log_sigma_t(t)

    def to_dict(self):
        return {
            "kind": self.kind,
            "law": law_to_dict(self.law),
            "sigma_rule": self.sigma_rule.to_dict(),
            "logN_rule": None if self.logN_rule is None else self.logN_rule.to_dict(),
            "truncation_depth": self.truncation_depth,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kind=d["kind"],
            law=law_from_dict(d.get("law", {})),
            sigma_rule=Rule.from_dict(d["sigma_rule"]),
            logN_rule=None if d.get("logN_rule") is None else Rule.from_dict(d["logN_rule"]),
            truncation_depth=d.get("truncation_depth"),
        )


def _require(spec, *kinds):
    if spec.kind not in kinds:
        raise ValueError(f"expected a {' or '.join(kinds)} spec, got {spec.kind}")


def _need_depth(spec, depth):
    d = spec.depth(depth)
    if d is None:
        raise ValueError("a truncation depth is required")
    return int(d)


# ---------------------------------------------------------------------------
# truncation


EXPLICIT_HEAD = 2**20


def _sum_series(log_f_t, depth, first=1, head=EXPLICIT_HEAD):
    """``sum_{n >= first} f(n)`` for non-increasing ``f >= 0`` given in logs.

    ``log_f_t(t)`` is ``log f`` at ``n = e^t``.  With a depth the sum stops
    at ``n = depth``.  Otherwise ``head`` terms are summed explicitly and
    the rest by Euler-Maclaurin, ``int_M^inf f - f(M)/2``, as an integral
    in ``t``; this copes with series as slow as ``1/(n log^2 n)``.  Raises
    ``DivergentScheme`` when that integral does not converge.
    """
    if depth is not None:
        n = np.arange(first, depth + 1, dtype=float)
        return float(np.sum(np.exp(log_f_t(np.log(n))))) if n.size else 0.0
    last = first + head - 1
    total = 0.0
    for lo in range(first, last + 1, 2**16):
        n = np.arange(lo, min(lo + 2**16, last + 1), dtype=float)
        total += float(np.sum(np.exp(log_f_t(np.log(n)))))

    def g(t):
        with np.errstate(over="ignore", invalid="ignore"):
            v = math.exp(min(float(log_f_t(np.array([t]))[0]) + t, 709.0))
        return v if math.isfinite(v) else math.inf

    t0 = math.log(last)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, t0, math.inf, limit=200)
        except integrate.IntegrationWarning as exc:
            raise chainbound.DivergentScheme(f"series tail integral: {exc}", last) from None
    if not math.isfinite(val) or err > 1e-6 * max(val, 1e-300) + 1e-300:
        raise chainbound.DivergentScheme("series tail integral does not converge", last)
    # quad cannot see divergence beyond its last node: estimate the decay
    # exponent of g(t) ~ t^-p far out and require p > 1
    a, b = t0 + 1e4, t0 + 1e5
    ga, gb = g(a), g(b)
    if ga > 0 and (gb == 0 or math.log(ga / gb) / math.log(b / a)) <= 1.01 and gb > 0:
        raise chainbound.DivergentScheme("series terms decay too slowly", last)
    return total + max(0.0, val - 0.5 * math.exp(float(log_f_t(np.array([t0]))[0])))


def truncation_report(spec, eps, depth, q=1e-6, head=2**12):
    """Size of what the depth-``depth`` truncation throws away, against ``0.01 eps``.

    Sum of maxima and trees: ``sum_{n > D} sigma_n m_n`` with ``m_n`` the
    ``1 - q`` quantile of the level maximum (``N_n`` copies, ``2^n`` for
    trees).  Independent sequences: the
    probability ``sum_{n > D} P(sigma_n |xi| > eps)`` that a discarded
    coordinate matters.
    """
    le = math.log(eps)
    if spec.kind == "IndepSequence":

        def log_f(t):
            return dist1d.log_tail_abs(spec.law, le - spec.log_sigma_t(t))

        target = 0.01
    else:

        def log_f(t):
            lln = spec.level_log_log_n_t(t)
            with np.errstate(over="ignore"):
                lm = dist1d.log_max_abs_quantile(spec.law, np.exp(np.minimum(lln, 700.0)), np.full(np.shape(t), 1.0 - q))
            # m ~ sqrt(2 log N) (Gaussian) or N^(1/alpha) beyond the float range
            far = 0.5 * (LOG2 + lln) if spec.law.is_gaussian else np.full(np.shape(t), np.inf)
            return spec.log_sigma_t(t) + np.where(lln > 700.0, far, lm)

        target = 0.01 * eps
    try:
        tail = _sum_series(log_f, None, first=depth + 1, head=head)
    except chainbound.DivergentScheme:
        tail = math.inf
    return {"depth": int(depth), "tail": tail, "target": target, "ok": bool(tail < target)}


def choose_depth(spec, eps, max_depth, q=1e-6):
    """Smallest depth whose truncation report is ``ok``, else ``max_depth`` (flagged)."""
    for d in range(1, max_depth + 1):
        rep = truncation_report(spec, eps, d, q)
        if rep["ok"]:
            return rep
    return truncation_report(spec, eps, max_depth, q)


# ---------------------------------------------------------------------------
# exact oracles


def exact_indep_logprob(spec, eps, depth=None):
    """``log P(sup_n sigma_n |xi_n| <= eps) = sum_n log P(|xi| <= eps/sigma_n)``.

    Without a depth the series is summed to convergence; divergence means
    the supremum is a.s. infinite and ``-inf`` is returned.
    """
    _require(spec, "IndepSequence")
    le = math.log(eps)

    def term(t):
        return dist1d.log_neg_log_cdf(spec.law, le - spec.log_sigma_t(t))

    try:
        return -_sum_series(term, spec.depth(depth))
    except chainbound.DivergentScheme:
        return LOG_PROB_MINUS_INFINITY


def summax_laplace_exact(spec, lam, depth=None, side="upper"):
    """``log E exp(-lam S) = sum_k max_laplace(law, lam sigma_k, N_k)``.

    Exact at finite depth.  Without a depth the infinite sum is bracketed:
    ``side="upper"`` returns a value at least the true one (what Chebyshev
    bounds need), ``side="lower"`` one at most the true one.
    """
    _require(spec, "SumOfMaxima")
    if lam == 0:
        return 0.0
    ll = math.log(lam)

    law = spec.law

    def term(k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        ln = spec.level_log_n(k)
        out = np.empty(k.shape)
        big = np.zeros(k.shape, bool)
        if law.alpha < 2.0:
            lx = ll + spec.level_log_load(k) + math.log(dist1d.stable_tail_constant(law.alpha)) / law.alpha
            big = dist1d.frechet_ok(law.alpha, lx, ln)
        if np.any(big):
            out[big] = -dist1d.frechet_laplace_many(law.alpha, lx[big])
        if not np.all(big):
            out[~big] = -dist1d.max_laplace_many(law, ll + spec.log_sigma(k[~big]), ln[~big])
        return out

    d = spec.depth(depth)
    try:
        if d is not None:
            return -float(np.sum(term(np.arange(1, d + 1, dtype=float))))
        # block sums grow while the level maxima still exceed 1/lam; only
        # count growth as divergence past that point
        j = 0
        while j < 1000 and ll + float(spec.level_log_load(2.0**j) if law.alpha < 2.0 else _gauss_load(spec, 2.0**j)) > 0:
            j += 1
        # while lam sigma_k > N_k the terms still grow (like N_k); sum those
        # levels explicitly so the block sum only sees non-increasing terms
        h = 1
        while h < 2**14 and ll + float(spec.log_sigma(float(h))) > float(spec.level_log_n(float(h))):
            h *= 2
        n_pre = max(128, 2 * h)
        pre = term(np.arange(1, n_pre + 1, dtype=float))

        def cached(k):
            k = np.atleast_1d(k)
            if k.size and k[-1] < n_pre and np.all(k == np.floor(k)):
                return pre[k.astype(int)]
            return term(k + 1.0)

        s = chainbound.sum_layers(
            cached, 2 * h, True, explicit_block=64, lower=(side == "upper"), diverge_after=2.0**j,
        )
        return -s.total
    except chainbound.DivergentScheme:
        return LOG_PROB_MINUS_INFINITY


def _gauss_load(spec, k):
    # scale of the maximum of N Gaussians: sigma sqrt(2 log N)
    return float(spec.log_sigma(k) + 0.5 * np.logaddexp(0.0, LOG2 + spec.level_log_log_n(k)))


def summax_upper(spec, eps, depth=None, per_decade=8, **kw):
    """Chebyshev upper bound on ``log P(S <= eps)`` from the exact Laplace transform."""
    from .tauber import chebyshev_upper

    return chebyshev_upper(eps, lambda lam: summax_laplace_exact(spec, lam, depth), per_decade=per_decade, **kw)[0]


def summax_upper_curve(spec, eps_grid, depth=None, per_decade=4, refine=False):
    """``(eps, upper bound, lam)`` over a grid, warm-starting each ``lam`` search.

    Going from large to small ``eps``, the optimal ``lam`` grows between
    ``eps^-1/2`` and ``eps^-7/2`` times its previous value for the rates
    seen here; the search still extends past that bracket when needed.
    """
    from .tauber import chebyshev_upper

    out = []
    prev = None
    for e in sorted((float(x) for x in eps_grid), reverse=True):
        rng = None
        if prev is not None:
            r = prev[0] / e
            rng = (prev[1] * r**0.5, prev[1] * r**3.5)
        b, lam = chebyshev_upper(
            e, lambda t: summax_laplace_exact(spec, t, depth), lambda_range=rng, per_decade=per_decade, refine=refine,
        )
        out.append((e, b, lam))
        prev = (e, lam)
    return out[::-1]


def level_scheme(spec, depth):
    """Finite scheme with scales ``sigma_n`` and the level multiplicities."""
    n = np.arange(1, depth + 1, dtype=float)
    le = tuple(float(x) for x in spec.log_sigma(n))
    ln = tuple(float(x) for x in spec.level_log_n(n))
    return chainbound.LayerScheme("Manual", le, tuple(le), head_log_n=ln)


def level_chain_lower(spec, eps, depth=None):
    """``max sum_n N_n log P(sigma_n |xi| <= b_n)`` over ``sum b_n = eps``.

    For sums of maxima this is ``log`` of ``P(every level term <= b_n)``,
    a lower bound on ``P(S <= eps)`` by independence.  For trees the same
    bound applies through ``sup <= sum_n sigma_n max_{|a|=n} |xi_a|``.
    """
    _require(spec, "SumOfMaxima", "BinaryTree")
    d = _need_depth(spec, depth)
    sch = level_scheme(spec, d)
    opt = chainbound.optimize_allocation(None, spec.law, sch, eps, d)
    return chainbound.chain_product_bound(None, spec.law, opt).value


def tree_upper_bound_gauss(spec, eps, depth=None):
    """``min_k 2^k log P(|xi| <= eps / sqrt(sum_{k < n <= D} sigma_n^2))`` for Gaussian trees.

    Each of the ``2^k`` level-``k`` nodes roots a subtree; one branch per
    subtree gives independent increments, and conditioning on the first
    ``k`` levels only shifts them (Anderson's inequality).
    Returns ``(bound, k_best)``.
    """
    _require(spec, "BinaryTree")
    if not spec.law.is_gaussian:
        raise ValueError("Gaussian law required")
    d = _need_depth(spec, depth)
    s2 = np.exp(2.0 * spec.log_sigma(np.arange(1, d + 1, dtype=float))) * spec.law.scale**2
    tails = np.cumsum(s2[::-1])[::-1]  # tails[k] = sum_{n > k} sigma_n^2, k = 0..d-1
    k = np.arange(d)
    vals = 2.0**k * dist1d.log_cdf_abs(dist1d.Law.gaussian(), math.log(eps) - 0.5 * np.log(tails))
    i = int(np.argmin(vals))
    return float(vals[i]), int(i)


def tree_levelmax_upper(spec, eps, depth=None):
    """``sum_n 2^n log P(|xi| <= 2 eps / sigma_n)``.

    On ``sup <= eps`` every edge variable satisfies ``sigma_n |xi_a| <= 2 eps``,
    and the ``2^n`` edges of level ``n`` are independent.
    """
    _require(spec, "BinaryTree")
    d = _need_depth(spec, depth)
    n = np.arange(1, d + 1, dtype=float)
    return float(np.sum(2.0**n * dist1d.log_cdf_abs(spec.law, math.log(2.0 * eps) - spec.log_sigma(n))))


# ---------------------------------------------------------------------------
# samplers


def sample_indep(spec, rng, size, depth=None):
    """Draws of ``max_{n <= D} sigma_n |xi_n|``."""
    _require(spec, "IndepSequence")
    d = _need_depth(spec, depth)
    out = np.zeros(size)
    for n in range(1, d + 1):
        out = np.maximum(out, math.exp(float(spec.log_sigma(n))) * np.abs(dist1d.sample(spec.law, rng, size)))
    return out


def sample_summax(spec, rng, size, depth=None):
    """Draws of ``S`` truncated at depth ``D``; maxima via the quantile transform."""
    _require(spec, "SumOfMaxima")
    d = _need_depth(spec, depth)
    out = np.zeros(size)
    for k in range(1, d + 1):
        m = dist1d.sample_max_abs(spec.law, float(spec.level_log_n(k)), rng, size)
        out += math.exp(float(spec.log_sigma(k))) * m
    return out


def sample_tree(spec, rng, size, depth=None, with_levelmax=False, chunk_nodes=2**22):
    """Tree supremum over all prefixes of length ``<= D``, level by level.

    Samples are processed in chunks so that ``chunk * 2^D`` stays below
    ``chunk_nodes``.  With ``with_levelmax`` also returns
    ``sum_n sigma_n max_{|a|=n} |xi_a|`` built from the same draws.
    """
    _require(spec, "BinaryTree")
    d = _need_depth(spec, depth)
    if d > MAX_TREE_DEPTH:
        raise ValueError(f"tree depth above {MAX_TREE_DEPTH} is too costly")
    chunk = max(1, chunk_nodes >> d)
    sig = np.exp(spec.log_sigma(np.arange(1, d + 1, dtype=float)))
    sups, lms = [], []
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        sums = np.zeros((m, 1))
        best = np.zeros((m, 1))
        lm = np.zeros(m)
        for n in range(1, d + 1):
            xi = dist1d.sample(spec.law, rng, (m, 2**n))
            sums = np.repeat(sums, 2, axis=1) + sig[n - 1] * xi
            best = np.maximum(np.repeat(best, 2, axis=1), np.abs(sums))
            if with_levelmax:
                lm += sig[n - 1] * np.max(np.abs(xi), axis=1)
        sups.append(best.max(axis=1))
        lms.append(lm)
    sup = np.concatenate(sups) if sups else np.empty(0)
    if with_levelmax:
        return sup, np.concatenate(lms)
    return sup


def sample_tree_sup(spec, rng, size, depth=None):
    return sample_tree(spec, rng, size, depth)


def sampler(spec):
    return {"IndepSequence": sample_indep, "SumOfMaxima": sample_summax, "BinaryTree": sample_tree_sup}[spec.kind]


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MCEstimate:
    eps: float
    p_hat: float
    ci_low: float
    ci_high: float
    n_samples: int
    seed: int
    truncation_depth: int | None
    level: float = 0.99
    warning: str = ""

    def to_dict(self):
        return asdict(self)


def clopper_pearson(k, n, level=0.99):
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def draw(spec, n_samples, seed=0, workers=1, depth=None):
    """``n_samples`` draws of the (truncated) supremum, independent of ``workers``."""
    d = spec.depth(depth)
    fn = sampler(spec)
    key = KINDS.index(spec.kind)
    return rng_mod.run_blocks(lambda g, m: fn(spec, g, m, d), n_samples, seed, workers, keys=(key,))


def mc_small_dev(spec, eps, n_samples, level=0.99, seed=0, workers=1, depth=None, samples=None):
    """Clopper-Pearson estimates of ``P(sup <= eps)`` for each ``eps``.

    ``eps`` may be a scalar or a grid; the same draws serve every grid
    point.  Estimates with fewer than 10 hits carry ``WindowTooDeep``.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    scalar = np.ndim(eps) == 0
    grid = np.atleast_1d(np.asarray(eps, dtype=float))
    x = draw(spec, n_samples, seed, workers, depth) if samples is None else samples
    x = np.sort(x)
    out = []
    for e in grid:
        k = int(np.searchsorted(x, e, side="right"))
        lo, hi = clopper_pearson(k, n_samples, level)
        w = ""
        if k < 10:
            w = "WindowTooDeep"
            warnings.warn(f"only {k} hits at eps={e:g}", WindowTooDeep, stacklevel=2)
        out.append(MCEstimate(float(e), k / n_samples, lo, hi, int(n_samples), int(seed), spec.depth(depth), level, w))
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class RateFit:
    expr: AsymptoticExpr
    se: dict = field(default_factory=dict)
    n_points: int = 0
    residual: float = 0.0


DEPTH_LOGS = {"log_p": 1, "loglog_p": 2, "logloglog_p": 3}


def fit_rate(samples, depth="log_p", log_term=True, min_span=1.5, min_points=5):
    """Least squares of the iterated log of ``-log P`` on ``log(1/eps)`` and ``log log(1/eps)``.

    ``samples`` are ``(eps, log_prob)`` pairs.  Returns the exponents
    ``a`` (power) and ``b`` (log power, if ``log_term``) with standard errors.
    """
    pts = [(float(e), float(v)) for e, v in samples]
    if len(pts) < min_points:
        raise ValueError(f"need at least {min_points} points")
    eps = np.array([e for e, _ in pts])
    span = math.log10(eps.max() / eps.min())
    if span < min_span:
        raise ValueError(f"eps spans {span:.2f} decades; need {min_span}")
    y = -np.array([v for _, v in pts])
    for _ in range(DEPTH_LOGS[depth]):
        if np.any(y <= 0):
            raise ValueError("iterated logarithm undefined on these values")
        y = np.log(y)
    lx = np.log(1.0 / eps)
    cols = [np.ones_like(lx), lx]
    if log_term:
        if np.any(lx <= 0):
            raise ValueError("log log(1/eps) needs eps < 1")
        cols.append(np.log(lx))
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(1, len(y) - X.shape[1])
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.pinv(X.T @ X)
    se = {"c": math.sqrt(cov[0, 0]), "a": math.sqrt(cov[1, 1])}
    b = 0.0
    if log_term:
        b = float(coef[2])
        se["b"] = math.sqrt(cov[2, 2])
    expr = AsymptoticExpr(depth, "eps", a=float(coef[1]), b=b, c=float(math.exp(coef[0])))
    return RateFit(expr, se, len(y), float(math.sqrt(s2)))


# ---------------------------------------------------------------------------
# boundedness


def boundedness(spec):
    """``"Bounded"``, ``"Unbounded"`` or ``"Unknown"`` for parametric specs.

    Sums of maxima (stable, ``sigma_k = 2^(-k/alpha) k^(-beta/alpha)``,
    ``N_k = 2^k``): bounded iff ``beta > max(1, alpha)``.  Gaussian sums of
    maxima with ``sigma_k = 2^-k`` and ``log N_k = 2^(gamma k) k^-beta``:
    bounded iff ``sum_k sigma_k sqrt(log N_k)`` converges.  Independent
    sequences: Borel-Cantelli, ``sum_n P(sigma_n |xi| > c) < inf``.  Trees:
    level maxima bound the supremum from both sides up to a factor 2.
    """
    law = spec.law
    sr = spec.sigma_rule
    if sr.kind == "table" or (spec.logN_rule is not None and spec.logN_rule.kind == "table"):
        return "Unknown"
    if spec.kind == "IndepSequence":
        for c in (1.0, 10.0, 100.0):
            term = lambda t, c=c: dist1d.log_tail_abs(law, math.log(c) - spec.log_sigma_t(t))  # noqa: E731
            try:
                _sum_series(term, None)
                return "Bounded"
            except chainbound.DivergentScheme:
                continue
        return "Unbounded"
    alpha = law.alpha
    if spec.kind == "SumOfMaxima":
        lr = spec.logN_rule
        if law.is_gaussian:
            if sr.kind == "power_log" and lr.kind == "power_log":
                # log(sigma_k sqrt(log N_k)) = c k log 2 - e log k
                c = -1.0 / sr.gamma + 0.5 * lr.gamma
                e = sr.beta / sr.gamma + 0.5 * lr.beta
                if c != 0.0:
                    return "Bounded" if c < 0 else "Unbounded"
                return "Bounded" if e > 1.0 else "Unbounded"
            term = lambda t: spec.log_sigma_t(t) + 0.5 * np.maximum(lr.log_log_n_t(t), 0.0)  # noqa: E731
            try:
                _sum_series(term, None)
                return "Bounded"
            except chainbound.DivergentScheme:
                return "Unbounded"
        if sr.kind == "power_log" and lr.kind == "dyadic" and sr.gamma == alpha:
            return "Bounded" if sr.beta > max(1.0, alpha) else "Unbounded"
        return "Unknown"
    # binary tree
    if law.is_gaussian:
        # level maxima ~ sigma_n sqrt(2 n log 2): summable means bounded
        term = lambda t: spec.log_sigma_t(t) + 0.5 * t  # noqa: E731
        try:
            _sum_series(term, None)
            return "Bounded"
        except chainbound.DivergentScheme:
            return "Unknown"
    if sr.kind == "power_log" and sr.gamma == alpha:
        b = sr.beta
        if b <= 1.0:
            return "Unbounded"
        if alpha < 1.0 or b > alpha:
            return "Bounded"
        return "Unknown"
    return "Unknown"
