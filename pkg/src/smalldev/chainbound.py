"""Chaining bounds for small deviations of suprema.

A layer scheme is a decreasing sequence of scales ``eps_k`` with budgets
``b_k``.  With ``N_k = Psi(eps_{k+1})`` the product
``prod_k P(eps_k |xi| <= b_k)^{N_k}`` lower-bounds the probability that all
increments stay below ``2 sum_k b_k``.  Everything here works with
``log``-probabilities, and infinite schemes are summed in dyadic blocks of
layers with an explicit tail allowance.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dist1d, entropy

LOG2 = math.log(2.0)
PROVENANCES = ("Geometric", "TheoremG", "StableCritical", "Optimized", "Manual")
KINDS = ("LogProbLower", "LogLaplaceLower", "LogProbUpper")

# truncation policy for infinite schemes
BLOCK_STOP = 1e-6  # last block relative to the running total
TAIL_STOP = 1e-4  # extrapolated tail relative to the running total
DIVERGE_RATIO = 1.0 - 1e-6
DIVERGE_RUN = 8
EXPLICIT_BLOCK = 2**16
FLAT_BLOCKS = 8
MAX_BLOCKS = 1100


class DivergentScheme(ArithmeticError):
    """Layer contributions do not decay; ``layer`` is where the stall begins."""

    def __init__(self, message, layer):
        super().__init__(f"{message} (from layer {layer})")
        self.layer = layer


class HypothesisError(ValueError):
    """The requested theorem does not apply to the profile and law."""


# ---------------------------------------------------------------------------
# schemes


@dataclass(frozen=True)
class Tail:
    """Formula for layers ``n_head + j``, ``j = 0, 1, ...`` evaluable at real ``j``.

    ``geometric``: ``log eps = log_eps0 - j log 2`` and ``log b = log_b0 + j log r``.
    ``stable_critical``: ``eps`` as above and ``b`` proportional to
    ``(eps_j^alpha Psi(eps_j / 2))^(1/(alpha+1))``, normalised by ``log_S``
    to total ``exp(log_total)``.
    ``dyadic``: ``eps`` only (Laplace mode).
    ``manual``: any callable ``fn(j) -> (log_eps, log_b, log_n)``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    profile: entropy.EntropyProfile | None = None
    fn: object = None

    def __call__(self, j):
        j = np.asarray(j, dtype=float)
        q = self.params
        if self.kind == "manual":
            return self.fn(j)
        log_eps = q["log_eps0"] - j * LOG2
        if self.kind == "geometric":
            return log_eps, q["log_b0"] + j * q["log_r"], None
        if self.kind == "dyadic":
            return log_eps, None, None
        if self.kind == "stable_critical":
            a = q["alpha"]
            log_n = entropy.log_psi_majorant(self.profile, log_eps - LOG2)
            log_w = (a * log_eps + log_n) / (a + 1.0)
            return log_eps, log_w - q["log_S"] + q["log_total"], log_n
        raise ValueError(f"unknown tail kind {self.kind!r}")

    def to_dict(self):
        d = {"kind": self.kind, "params": dict(self.params)}
        if self.profile is not None:
            d["profile"] = self.profile.to_dict()
        return d


@dataclass(frozen=True)
class LayerScheme:
    """Explicit head layers followed by an optional infinite tail.

    Arrays are in log form.  ``log_n`` overrides the multiplicities
    ``Psi(eps_{k+1})`` of the head (for hand-built schemes).  For a finite
    scheme the last multiplicity uses ``eps_K / 2`` as the next scale.
    ``block_scale`` sets the first dyadic block length of the tail sum.
    """

    provenance: str
    head_log_eps: tuple
    head_log_b: tuple | None
    tail: Tail | None = None
    head_log_n: tuple | None = None
    budget: float | None = None
    block_scale: int = 1
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        e = np.asarray(self.head_log_eps, dtype=float)
        if np.any(np.diff(e) >= 0):
            raise ValueError("eps_seq must be strictly decreasing")
        if self.head_log_b is not None:
            if len(self.head_log_b) != len(e):
                raise ValueError("eps_seq and b_seq differ in length")
            if not np.all(np.isfinite(self.head_log_b)):
                raise ValueError("all b_k must be positive and finite")
        if self.tail is None and len(e) == 0:
            raise ValueError("empty scheme")

    @property
    def n_head(self):
        return len(self.head_log_eps)

    @property
    def infinite(self):
        return self.tail is not None

    @property
    def truncation_K(self):
        return None if self.infinite else self.n_head

    def layers(self, k):
        """``(log_eps, log_b, log_n or None)`` at integer or real layer indices ``k``."""
        k = np.asarray(k, dtype=float)
        h = self.n_head
        le = np.empty(k.shape)
        lb = np.full(k.shape, np.nan)
        ln = np.full(k.shape, np.nan)
        head = k < h
        if np.any(head):
            idx = k[head].astype(int)
            le[head] = np.asarray(self.head_log_eps, dtype=float)[idx]
            if self.head_log_b is not None:
                lb[head] = np.asarray(self.head_log_b, dtype=float)[idx]
            if self.head_log_n is not None:
                ln[head] = np.asarray(self.head_log_n, dtype=float)[idx]
        if np.any(~head):
            if self.tail is None:
                raise IndexError("layer beyond a finite scheme")
            te, tb, tn = self.tail(k[~head] - h)
            le[~head] = te
            if tb is not None:
                lb[~head] = tb
            if tn is not None:
                ln[~head] = tn
        return le, lb, ln

    def next_log_eps(self, k):
        """``log eps_{k+1}``, continuing a finite scheme by halving."""
        k = np.asarray(k, dtype=float)
        if self.infinite:
            return self.layers(k + 1.0)[0]
        h = self.n_head
        e = np.asarray(self.head_log_eps, dtype=float)
        nxt = np.where(k + 1 < h, e[np.minimum(k + 1, h - 1).astype(int)], e[-1] - LOG2)
        return nxt

    def eps_seq(self, n=None):
        n = self.n_head if n is None else n
        return np.exp(self.layers(np.arange(n))[0])

    def b_seq(self, n=None):
        n = self.n_head if n is None else n
        return np.exp(self.layers(np.arange(n))[1])

    def to_dict(self):
        return {
            "provenance": self.provenance,
            "head_log_eps": [float(x) for x in self.head_log_eps],
            "head_log_b": None if self.head_log_b is None else [float(x) for x in self.head_log_b],
            "head_log_n": None if self.head_log_n is None else [float(x) for x in self.head_log_n],
            "tail": None if self.tail is None else self.tail.to_dict(),
            "budget": self.budget,
            "truncation_K": self.truncation_K,
            "params": dict(self.params),
        }


def manual_scheme(eps_seq, b_seq=None, log_n=None):
    """Finite hand-built scheme from plain sequences."""
    le = tuple(float(x) for x in np.log(np.asarray(eps_seq, dtype=float)))
    lb = None if b_seq is None else tuple(float(x) for x in np.log(np.asarray(b_seq, dtype=float)))
    ln = None if log_n is None else tuple(float(x) for x in log_n)
    budget = None if b_seq is None else float(np.sum(b_seq))
    return LayerScheme("Manual", le, lb, head_log_n=ln, budget=budget)


def eps_dyadic(eps0, K=None):
    """``eps_k = 2^-k eps0`` without budgets, for Laplace chaining."""
    if K is None:
        return LayerScheme("Geometric", (), None, tail=Tail("dyadic", {"log_eps0": math.log(eps0)}))
    return LayerScheme("Geometric", tuple(math.log(eps0) - LOG2 * np.arange(K + 1)), None)


# ---------------------------------------------------------------------------
# summation of non-negative layer magnitudes


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


@dataclass
class SeriesSum:
    total: float
    tail: float
    layers: int
    blocks: list


def sum_layers(
    term, n_head, infinite, block_scale=1, coarse=False, explicit_block=EXPLICIT_BLOCK, lower=False, diverge_after=0.0,
):
    """Sum ``term(k) >= 0`` over head layers and, if ``infinite``, the tail.

    Tail layers are grouped into eight blocks of ``w`` layers, then blocks
    of ``2w, 4w, ...`` layers.  Blocks of at most ``explicit_block`` layers
    are summed exactly; larger ones are bounded above by
    ``term(a) + int_a^{b-1} term``, valid for non-increasing terms (checked
    on the quadrature nodes).  Summation stops once a block is negligible
    and so is its geometric extrapolation, which is returned as ``tail``.

    With ``lower`` the result is a lower bound instead: large blocks use
    ``int_a^b term`` and no tail is added.  Growing blocks that start
    before layer ``diverge_after`` do not count towards divergence.
    """
    total = float(np.sum(term(np.arange(n_head, dtype=float)))) if n_head else 0.0
    if not infinite:
        return SeriesSum(total, 0.0, n_head, [])
    w = max(1, int(block_scale))
    blocks = []
    start = 0
    size = w
    run = 0
    run_start = None
    gx, gw = (_GL16_X, _GL16_W) if coarse else (_GL_X, _GL_W)
    for _ in range(MAX_BLOCKS):
        a = float(n_head + start)
        if size <= explicit_block:
            bsum = float(np.sum(term(a + np.arange(size, dtype=float))))
        else:
            hi = a + size if lower else a + size - 1.0
            if not math.isfinite(hi):
                raise DivergentScheme("layer index overflow", int(a))
            x = 0.5 * (hi - a) * gx + 0.5 * (hi + a)
            vals = term(x)
            head_val = float(term(np.array([a]))[0])
            seq = np.concatenate([[head_val], vals])
            if np.any(np.diff(seq) > 1e-9 * np.max(seq) + 1e-300):
                raise DivergentScheme("layer terms increase inside a large block", int(a))
            bsum = (0.0 if lower else head_val) + 0.5 * (hi - a) * float(np.dot(gw, vals))
        if not math.isfinite(bsum):
            raise DivergentScheme("non-finite layer contribution", int(a))
        blocks.append(bsum)
        total += bsum
        if len(blocks) >= 2:
            prev = blocks[-2]
            grow = prev > 0 and bsum >= DIVERGE_RATIO * prev
            # equal-size blocks may grow for a while before the decay sets in;
            # only doubling blocks count towards divergence
            if grow and len(blocks) > FLAT_BLOCKS and a >= diverge_after:
                if run == 0:
                    run_start = int(a)
                run += 1
                if run >= DIVERGE_RUN:
                    raise DivergentScheme("layer contributions do not decay", run_start)
            else:
                run = 0
            if total == 0.0 and bsum == 0.0 and prev == 0.0:
                return SeriesSum(0.0, 0.0, n_head + start + size, blocks)
            if not grow and bsum <= BLOCK_STOP * total:
                q = bsum / prev if prev > 0 else 0.0
                tail = bsum * q / (1.0 - q) if q < 1 else math.inf
                if tail <= TAIL_STOP * total:
                    if lower:
                        return SeriesSum(total, 0.0, n_head + start + size, blocks)
                    return SeriesSum(total + tail, tail, n_head + start + size, blocks)
        start += size
        if len(blocks) >= FLAT_BLOCKS:
            size *= 2
    raise DivergentScheme("layer sum did not settle", n_head + start)


# ---------------------------------------------------------------------------
# layer schemes


def _law_r_interval(law, c2=None):
    if law is None or law.alpha == 2.0:
        return 0.5, 1.0
    if c2 is None:
        raise ValueError("stable schemes need the doubling constant C2")
    return 0.5 * c2 ** (1.0 / law.alpha), 1.0


def default_r(law=None, c2=None):
    """``3/4`` for Gaussian laws, the midpoint of the admissible interval otherwise."""
    lo, hi = _law_r_interval(law, c2)
    return 0.75 if lo == 0.5 else 0.5 * (lo + hi)


def _check_r(r, law, c2):
    lo, hi = _law_r_interval(law, c2)
    if not lo < r < hi:
        raise ValueError(f"r={r} outside the admissible interval ({lo:.6g}, {hi:.6g})")


def layers_geometric(eps, r, K=None, law=None, c2=None, check=True):
    """``eps_k = 2^-k eps`` and ``b_k = r^k eps``; infinite when ``K is None``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if check:
        _check_r(r, law, c2)
    elif not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    le, lr = math.log(eps), math.log(r)
    if K is None:
        tail = Tail("geometric", {"log_eps0": le, "log_b0": le, "log_r": lr})
        return LayerScheme("Geometric", (), None, tail=tail, budget=eps / (1.0 - r), params={"r": r, "eps": eps})
    k = np.arange(K + 1)
    return LayerScheme(
        "Geometric", tuple(le - LOG2 * k), tuple(le + lr * k),
        budget=float(eps * (1.0 - r ** (K + 1)) / (1.0 - r)), params={"r": r, "eps": eps},
    )


def _bisect_levels(p, log_eps, targets, iters=80):
    """Solve ``log Psi(x) = t`` for each target on ``[log eps, log sigma]``."""
    t = np.asarray(targets, dtype=float)
    lo = np.full(t.shape, float(log_eps))
    hi = np.full(t.shape, p.log_sigma)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = entropy.log_psi_majorant(p, mid) >= t
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def theorem_g_head(p, eps, r):
    """Upper layers ``(log_eps, log_b)`` from ``sigma`` down to (excluding) ``eps``."""
    le = math.log(eps)
    if le >= p.log_sigma:
        return np.array([]), np.array([]), 0
    lpe = entropy.log_psi_majorant(p, le)
    lr = math.log(r)
    n = max(1, math.ceil(lpe / -lr - 1e-9))
    ells = np.arange(1, n)
    levels = _bisect_levels(p, le, lpe + (n - ells) * lr)
    # keep strictly decreasing scales even where Psi is flat
    head_e = np.concatenate([[p.log_sigma], levels])
    for i in range(1, len(head_e)):
        if head_e[i] >= head_e[i - 1]:
            head_e[i] = np.nextafter(head_e[i - 1], -np.inf)
    head_e = np.maximum(head_e, np.nextafter(le, np.inf))
    head_b = le + (n - np.arange(n)) * lr
    return head_e, head_b, n


def layers_theorem_g(p, eps, r=None, law=None, c2=None):
    """Scales adapted to ``Psi``: ``Psi(eps_l) = r^(n-l) Psi(eps)`` above ``eps``.

    Starts at ``eps_0 = sigma`` with ``n`` the least integer with
    ``r^n Psi(eps) <= 1``; the upper budgets are ``r^(n-l) eps`` and a
    geometric tail starts at ``eps``.  For ``eps >= sigma`` only the tail
    remains.  An explicit ``r`` only has to lie in ``(0, 1)``; whether the
    tail then converges is settled when the scheme is evaluated.
    """
    r = default_r(law, c2) if r is None else r
    tail_scheme = layers_geometric(eps, r, None, law, c2, check=False)
    head_e, head_b, n = theorem_g_head(p, eps, r)
    budget = float(np.sum(np.exp(head_b))) + tail_scheme.budget
    return LayerScheme(
        "TheoremG", tuple(float(x) for x in head_e), tuple(float(x) for x in head_b),
        tail=tail_scheme.tail, budget=budget, params={"r": r, "n": n, "eps": eps},
    )


def _stable_weight_sum(p, eps, alpha):
    le = math.log(eps)
    tail = Tail("stable_critical", {"log_eps0": le, "alpha": alpha, "log_S": 0.0, "log_total": 0.0}, p)
    scale = max(1, int(abs(le) / LOG2))
    s = sum_layers(lambda k: np.exp(tail(k)[1]), 0, True, block_scale=scale)
    return s, scale


def layers_stable_critical(p, eps, alpha, head=None):
    """``eps_k = 2^-k eps`` with budgets ``b_k ∝ (eps_k^alpha N(eps_{k+1}))^(1/(alpha+1))``.

    The budgets add up to ``eps``.  ``head`` optionally prepends upper
    layers ``(log_eps, log_b)`` above ``eps``.  Raises ``DivergentScheme``
    when the normalising series diverges.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    s, scale = _stable_weight_sum(p, eps, alpha)
    le = math.log(eps)
    tail = Tail("stable_critical", {"log_eps0": le, "alpha": alpha, "log_S": math.log(s.total), "log_total": le}, p)
    he, hb = (np.array([]), np.array([])) if head is None else head
    return LayerScheme(
        "StableCritical", tuple(float(x) for x in he), tuple(float(x) for x in hb), tail=tail,
        budget=float(np.sum(np.exp(hb))) + eps, block_scale=scale,
        params={"alpha": alpha, "S": s.total, "S_tail": s.tail, "eps": eps},
    )


# ---------------------------------------------------------------------------
# bounds


@dataclass
class BoundResult:
    kind: str
    value: float
    at: float
    radius_factor: float | None
    layers: LayerScheme
    truncation_error_bound: float
    n_layers: int
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")

    def to_dict(self):
        return {
            "kind": self.kind,
            "value": self.value,
            "at": self.at,
            "radius_factor": self.radius_factor,
            "truncation_error_bound": self.truncation_error_bound,
            "n_layers": self.n_layers,
            "constants": dict(self.constants),
            "layers": self.layers.to_dict(),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _log_n(p, scheme, k):
    """Multiplicities ``log N_k`` at layer indices ``k``."""
    _, _, ln = scheme.layers(k)
    missing = np.isnan(ln)
    if np.any(missing):
        ln = np.where(missing, entropy.log_psi_majorant(p, scheme.next_log_eps(k)), ln)
    return ln


def layer_contributions(p, law, scheme, k):
    """``-N_k log P(eps_k |xi| <= b_k)`` at layer indices ``k`` (non-negative)."""
    k = np.asarray(k, dtype=float)
    le, lb, _ = scheme.layers(k)
    if np.any(np.isnan(lb)):
        raise ValueError("scheme has no budgets")
    ln = _log_n(p, scheme, k)
    with np.errstate(over="ignore"):
        return np.exp(ln + dist1d.log_neg_log_cdf(law, lb - le))


def _constants(law):
    c = dist1d.small_ball_constant(law)
    return {"A": c.A, "c_floor": c.c_floor}


def chain_product_bound(p, law, scheme):
    """``sum_k N_k log P(eps_k |xi| <= b_k)`` with ``N_k = Psi(eps_{k+1})``.

    Certifies ``log P(sup increments <= 2 sum b_k) >= value``.  The tail
    allowance of the truncated sum is already included in ``value``.
    """
    s = sum_layers(
        lambda k: layer_contributions(p, law, scheme, k),
        scheme.n_head, scheme.infinite, scheme.block_scale,
    )
    budget = scheme.budget
    if budget is None:
        budget = float(np.sum(scheme.b_seq()))
    return BoundResult(
        "LogProbLower", -s.total, float(scheme.params.get("eps", np.exp(scheme.layers(np.zeros(1))[0][0]))),
        2.0 * budget, scheme, s.tail, s.layers, _constants(law),
    )


def laplace_contributions(p, law, lam, scheme, k):
    """``-max_laplace(law, 2 lam eps_k, N_k)`` at layer indices ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    le, _, _ = scheme.layers(k)
    ln = _log_n(p, scheme, k)
    return -dist1d.max_laplace_many(law, math.log(2.0 * lam) + le, ln)


def laplace_chain_bound(p, law, lam, scheme):
    """``sum_k max_laplace(law, 2 lam eps_k, Psi(eps_{k+1}))``.

    A lower bound on ``log E exp(-lam sup increments)``.  ``scheme`` may
    be a ``LayerScheme`` or a finite decreasing sequence of scales.
    """
    if not isinstance(scheme, LayerScheme):
        scheme = manual_scheme(scheme)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0:
        return BoundResult("LogLaplaceLower", 0.0, 0.0, None, scheme, 0.0, 0, _constants(law))
    # one vectorised pass over the layers the block sum usually needs
    n_pre = scheme.n_head + (FLAT_BLOCKS + 2**7) * scheme.block_scale if scheme.infinite else scheme.n_head
    pre = laplace_contributions(p, law, lam, scheme, np.arange(n_pre, dtype=float))

    def term(k):
        k = np.atleast_1d(k)
        if k.size and k[-1] < n_pre and np.all(k == np.floor(k)):
            return pre[k.astype(int)]
        return laplace_contributions(p, law, lam, scheme, k)

    s = sum_layers(term, scheme.n_head, scheme.infinite, scheme.block_scale, coarse=True)
    return BoundResult("LogLaplaceLower", -s.total, float(lam), None, scheme, s.tail, s.layers, _constants(law))


def layer_table(p, law, scheme, n=None):
    """Rows ``(k, eps_k, b_k, N_k_log, contribution)`` for the first ``n`` layers."""
    if n is None:
        if scheme.infinite:
            n = chain_product_bound(p, law, scheme).n_layers
        else:
            n = scheme.n_head
    k = np.arange(n, dtype=float)
    le, lb, _ = scheme.layers(k)
    ln = _log_n(p, scheme, k)
    contrib = -layer_contributions(p, law, scheme, k)
    return [
        {"k": int(i), "eps_k": float(np.exp(e)), "b_k": float(np.exp(b)), "N_k_log": float(m), "contribution": float(c)}
        for i, e, b, m, c in zip(k, le, lb, ln, contrib)
    ]


def write_layer_csv(path, rows):
    cols = ["k", "eps_k", "b_k", "N_k_log", "contribution"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row["k"]] + [format(row[c], ".17g") for c in cols[1:]])


# ---------------------------------------------------------------------------
# budget allocation


def _log_marginal(law, ln, le, lx, h=1e-4):
    """``log`` of ``d/db [N log P(|xi| <= b/eps)]`` at ``b = eps e^lx``."""
    with np.errstate(invalid="ignore", over="ignore"):
        mid = dist1d.log_neg_log_cdf(law, lx)
        slope = (dist1d.log_neg_log_cdf(law, lx + h) - dist1d.log_neg_log_cdf(law, lx - h)) / (2 * h)
        out = ln - le - lx + mid + np.log(-slope)
    return np.where(np.isnan(out), -np.inf, out)


def optimize_allocation(p, law, scheme, b, K, iters=100):
    """Best split of the budget ``b`` over the first ``K`` layers of ``scheme``.

    ``log P(|xi| <= x)`` is concave in ``x`` for symmetric unimodal laws, so
    the problem is concave and the optimum equalises the marginal gains
    ``N_k f(b_k/eps_k) / (eps_k F(b_k/eps_k))``.  Nested bisection on the
    common marginal and on each ``b_k``.  The start scheme (the first ``K``
    layers rescaled to total ``b``) is returned if it does better.
    """
    if b <= 0 or K < 1:
        raise ValueError("need b > 0 and K >= 1")
    k = np.arange(K, dtype=float)
    le = scheme.layers(k)[0]
    nxt = scheme.next_log_eps(k) if scheme.infinite or K < scheme.n_head else np.append(le[1:], le[-1] - LOG2)
    ln = scheme.layers(k)[2]
    if np.any(np.isnan(ln)):
        ln = np.where(np.isnan(ln), entropy.log_psi_majorant(p, nxt), ln)
    log_n = tuple(float(x) for x in ln)

    def make(lb):
        return LayerScheme(
            "Optimized", tuple(float(x) for x in le), tuple(float(x) for x in lb), head_log_n=log_n,
            budget=float(b), params={"start": scheme.provenance},
        )

    if K == 1:
        return make([math.log(b)])
    lo_x, hi_x = -50.0, 50.0

    def solve(log_mu):
        lo = np.full(K, lo_x)
        hi = np.full(K, hi_x)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            big = _log_marginal(law, ln, le, mid) > log_mu
            lo = np.where(big, mid, lo)
            hi = np.where(big, hi, mid)
        return 0.5 * (lo + hi)

    log_b = math.log(b)

    def spent(log_mu):
        return float(np.logaddexp.reduce(le + solve(log_mu)))

    # the allocation grows as the common marginal drops: bracket by doubling steps
    c = float(np.max(_log_marginal(law, ln, le, np.full(K, lo_x))))
    step = 1.0
    a = c - step
    while spent(a) <= log_b and step < 1e6:
        c, step = a, 2.0 * step
        a = c - step
    for _ in range(iters):
        mid = 0.5 * (a + c)
        lx = solve(mid)
        tot = float(np.logaddexp.reduce(le + lx))
        if tot > log_b:
            a = mid
        else:
            c = mid
    lx = solve(c)
    lb = le + lx
    # rescale onto the budget exactly
    lb = lb - float(np.logaddexp.reduce(lb)) + log_b
    opt = make(lb)
    if scheme.head_log_b is not None or scheme.tail is not None:
        sb = scheme.layers(k)[1]
        if not np.any(np.isnan(sb)):
            start = make(sb - float(np.logaddexp.reduce(sb)) + log_b)
            if chain_product_bound(p, law, start).value > chain_product_bound(p, law, opt).value:
                return start
    return opt


# ---------------------------------------------------------------------------
# theorem dispatch


def _realized(value, rate, eps):
    """``-value`` (or its iterated logs) over the predicted magnitude at ``eps``."""
    if rate is None:
        return None
    mag = -value
    for _ in range(("log_p", "loglog_p", "logloglog_p").index(rate.depth)):
        if mag <= 0:
            return None
        mag = math.log(mag)
    return mag / math.exp(rate.log_magnitude(eps))


def _stable_r(c2, alpha):
    lo = 0.5 * c2 ** (1.0 / alpha)
    return 0.5 * (lo + 1.0)


def theorem_bound(p, law, eps, theorem_id, r=None, force=False, per_decade=4):
    """Lower bound on ``log P(sup increments <= radius_factor)`` by ``theorem_id``.

    ``theorem_id`` is one of ``entropy.THEOREMS``.  The product-bound ids use
    entropy-adapted scales, or the stable-critical budgets below ``eps``
    under the same upper layers.  The Laplace ids chain with
    ``eps_k = 2^-k sigma`` and then apply
    ``P(V <= eps) >= E exp(-lam V) - exp(-lam eps)``.
    """
    from . import tauber

    alpha = law.alpha
    report = entropy.regularity_report(p)
    decision = entropy.classify_regime(p, alpha, report)
    if theorem_id not in entropy.THEOREMS:
        raise ValueError(f"unknown theorem {theorem_id!r}")
    if theorem_id not in decision.applicable and not force:
        raise HypothesisError(f"{theorem_id} hypotheses fail: {decision.reasons[theorem_id][1]}")
    rate = decision.predicted_rate.get(theorem_id)
    consts = _constants(law)
    consts["theorem"] = theorem_id

    if theorem_id in ("Thm1", "Thm2", "Thm4"):
        if alpha == 2.0:
            r = default_r() if r is None else r
        else:
            r = _stable_r(report.c2_sup, alpha) if r is None else r
        scheme = layers_theorem_g(p, eps, r)
        res = chain_product_bound(p, law, scheme)
        tilde = entropy.psi_tilde(p, min(eps, p.sigma))
        consts.update(r=r, C2=report.c2_sup, K=-res.value / tilde, psi_tilde=tilde)
    elif theorem_id == "Thm5":
        r = 0.75 if r is None else r
        e0 = min(eps, p.sigma)
        head = theorem_g_head(p, e0, r)[:2]
        scheme = layers_stable_critical(p, e0, alpha, head=head)
        res = chain_product_bound(p, law, scheme)
        ph = entropy.psi_hat(p, e0, alpha)
        consts.update(r=r, psi_hat=ph, K=-res.value / (e0 ** (-alpha) * ph ** (alpha + 1.0)))
    else:
        scheme = eps_dyadic(p.sigma)
        lap = lambda lam: laplace_chain_bound(p, law, lam, scheme).value  # noqa: E731
        val, lam = tauber.laplace_to_prob_lower(eps, lap, per_decade=per_decade)
        if val is tauber.NO_BOUND:
            raise HypothesisError("Laplace route gave no bound at this eps")
        n = laplace_chain_bound(p, law, lam, scheme).n_layers
        res = BoundResult("LogProbLower", val, eps, eps, scheme, 0.0, n)
        consts.update(lam=lam)
    consts["K0"] = res.radius_factor / eps
    consts["K_rate"] = _realized(res.value, rate, eps)
    res.at = float(eps)
    res.constants = consts
    return res
