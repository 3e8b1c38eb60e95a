"""Depth-2 exponent of the Gaussian sum of maxima from Monte Carlo.

``sigma_k = 2^-k``, ``log N_k = 2^k``, truncated at depth 15.  Fits
``log log|log P| = const + a log(1/eps)`` on sub-windows of the
accessible range and compares with the Laplace-chain prediction.
"""

import argparse
import math
import warnings

import numpy as np

from smalldev import chainbound as cb
from smalldev import entropy, procsim as ps, tauber
from smalldev.dist1d import Law
from smalldev.procsim import ProcessSpec, Rule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    p = entropy.exp_poly_log(1.0, 0.0)
    lams = np.geomspace(1e2, 1e6, 9)
    v = np.array([-cb.laplace_chain_bound(p, Law.gaussian(), lam, cb.eps_dyadic(p.sigma)).value for lam in lams])
    b = float(np.polyfit(np.log(np.log(lams)), np.log(v / lams), 1)[0])
    pred = tauber.taub_convert(tauber.AsymptoticExpr("log_p", "lambda", a=1.0, b=b))
    print(f"Laplace chain: -log E e^(-lam V) ~ lam (log lam)^{b:.3f}  ->  log|log P| ~ eps^-{pred.a:.3f}")

    s = ProcessSpec("SumOfMaxima", Law.gaussian(), Rule("power_log"), Rule("power_log"), 15)
    x = ps.draw(s, args.n, args.seed, args.workers)
    print("quantiles", dict(zip(("1e-4", "1e-3", "1e-2", "0.1", "0.3"), np.round(np.quantile(x, [1e-4, 1e-3, 1e-2, 0.1, 0.3]), 4))))
    for q_lo, q_hi in ((1e-4, 0.3), (1e-4, 0.1), (1e-3, 0.3)):
        lo, hi = np.quantile(x, [q_lo, q_hi])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ps.WindowTooDeep)
            est = ps.mc_small_dev(s, np.geomspace(lo, hi, 10), args.n, samples=x)
        f = ps.fit_rate([(m.eps, math.log(m.p_hat)) for m in est], depth="loglog_p", log_term=False, min_span=0.0)
        print(f"  window [{lo:.3f}, {hi:.3f}]  a = {f.expr.a:.2f} +- {f.se['a']:.2f}")


if __name__ == "__main__":
    main()
