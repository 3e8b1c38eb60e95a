"""Rate regressions on the exact oracles.

Independent critical sequences (exact product formula) and stable sums
of maxima (Chebyshev bound on the exact Laplace transform), fitted as
``-log P ~ c eps^-a |log eps|^b`` over several eps windows.
"""

import argparse
import time
from dataclasses import dataclass

import numpy as np

from smalldev import procsim as ps
from smalldev.dist1d import Law
from smalldev.procsim import ProcessSpec, Rule


@dataclass
class Window:
    lo: float
    hi: float
    num: int = 8

    def grid(self):
        return np.geomspace(self.lo, self.hi, self.num)


WINDOWS = [Window(1e-4, 1e-1), Window(1e-8, 1e-5), Window(1e-12, 1e-6, 6)]


def indep_fits(windows):
    print("independent sequence, sigma_n = n^(-1/alpha) log(n+1)^(-beta/alpha)")
    for alpha, beta in ((1.0, 2.0), (0.8, 1.5)):
        s = ProcessSpec("IndepSequence", Law.stable(alpha), Rule("stable_critical", beta=beta, alpha=alpha))
        for w in windows:
            f = ps.fit_rate([(e, ps.exact_indep_logprob(s, e)) for e in w.grid()])
            print(f"  alpha={alpha} beta={beta} [{w.lo:g}, {w.hi:g}]  a={f.expr.a:.3f} (target {alpha})"
                  f"  b={f.expr.b:.3f} (target {1 - beta:g})")


def summax_fits(windows):
    print("stable sum of maxima, alpha=1, sigma_k = 2^-k k^-beta, N_k = 2^k")
    targets = {1.5: (2.0, 0.0), 2.0: (1.0, 2.0), 3.0: (1.0, -1.0)}
    for beta, (a, b) in targets.items():
        s = ProcessSpec("SumOfMaxima", Law.stable(1.0), Rule("power_log", beta=beta), Rule("dyadic"))
        for w in windows:
            t = time.time()
            f = ps.fit_rate([(e, v) for e, v, _ in ps.summax_upper_curve(s, w.grid())])
            print(f"  beta={beta} [{w.lo:g}, {w.hi:g}]  a={f.expr.a:.3f} (target {a})  b={f.expr.b:.3f} (target {b})"
                  f"  {time.time() - t:.1f}s")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--which", choices=["indep", "summax", "all"], default="all")
    args = ap.parse_args()
    if args.which in ("indep", "all"):
        indep_fits(WINDOWS)
    if args.which in ("summax", "all"):
        summax_fits(WINDOWS)


if __name__ == "__main__":
    main()
