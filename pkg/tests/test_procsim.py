import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from smalldev import dist1d, procsim as ps
from smalldev.dist1d import Law
from smalldev.procsim import ProcessSpec, Rule

G = Law.gaussian()


def indep_gauss(depth=20):
    return ProcessSpec("IndepSequence", G, Rule("power_log", gamma=1.0), truncation_depth=depth)


def test_sigma_rules():
    r = Rule("power_log", gamma=2.0, beta=1.0)
    assert math.exp(r.log_sigma(3.0)) == pytest.approx(2**-1.5 * 3**-0.5)
    r = Rule("stable_critical", beta=2.0, alpha=1.5)
    assert math.exp(r.log_sigma(4.0)) == pytest.approx(4 ** (-1 / 1.5) * math.log(5) ** (-2 / 1.5))
    r = Rule("tree_poly", gamma=1.0, beta=1.0)
    assert math.exp(r.log_sigma(2.0)) == pytest.approx(2**-1.5 / math.log(3))
    assert np.allclose(np.exp(Rule("table", table=(0.5, 0.25)).log_sigma(np.array([1.0, 2.0]))), [0.5, 0.25])


def test_log_n_rules():
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("dyadic"))
    assert s.level_log_n(5.0) == pytest.approx(5 * math.log(2))
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("power_log", gamma=1.0, beta=1.0))
    assert s.level_log_n(4.0) == pytest.approx(16 / 4)
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("ones"))
    assert s.level_log_n(7.0) == 0.0


def test_spec_round_trip():
    s = ProcessSpec("SumOfMaxima", Law.stable(1.5), Rule("stable_critical", beta=2.0, alpha=1.5), Rule("dyadic"), 30)
    t = ProcessSpec.from_dict(s.to_dict())
    assert t == s


def test_spec_validation():
    with pytest.raises(ValueError):
        ProcessSpec("BinaryTree", G, Rule("power_log"), truncation_depth=29)
    with pytest.raises(ValueError):
        ProcessSpec("IndepSequence", G, Rule("table", table=(0.5, 0.7)))


def test_exact_indep_against_mc():
    s = indep_gauss()
    grid = [0.05, 0.1, 0.3, 0.6]
    est = ps.mc_small_dev(s, grid, 20000, seed=7)
    for e, m in zip(grid, est):
        p = math.exp(ps.exact_indep_logprob(s, e))
        assert m.ci_low <= p <= m.ci_high


def test_exact_indep_product_form():
    s = indep_gauss(5)
    e = 0.2
    ref = sum(math.log(dist1d.cdf_abs(G, e * 2**n)) for n in range(1, 6))
    assert ps.exact_indep_logprob(s, e) == pytest.approx(ref, rel=1e-10)


def test_exact_indep_decreases_with_depth():
    vals = [ps.exact_indep_logprob(indep_gauss(d), 0.1) for d in (2, 5, 10)]
    assert vals[0] >= vals[1] >= vals[2]
    inf = ps.exact_indep_logprob(ProcessSpec("IndepSequence", G, Rule("power_log")), 0.1)
    assert inf <= vals[2] and inf == pytest.approx(vals[2], rel=1e-6)


def test_summax_laplace_unit_counts_closed_form():
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("ones"), 4)
    lam = 3.0
    ref = sum(dist1d.max_laplace_n1_gaussian(lam * 2.0**-k) for k in range(1, 5))
    assert ps.summax_laplace_exact(s, lam) == pytest.approx(ref, rel=1e-9)
    assert ps.summax_laplace_exact(s, 0.0) == 0.0


def test_summax_infinite_laplace_sides():
    s = ProcessSpec("SumOfMaxima", Law.stable(1.0), Rule("power_log", beta=2.0), Rule("dyadic"))
    up = ps.summax_laplace_exact(s, 100.0, side="upper")
    lo = ps.summax_laplace_exact(s, 100.0, side="lower")
    fin = ps.summax_laplace_exact(s, 100.0, depth=400)
    assert lo <= up <= fin
    assert up - lo < 0.05 * abs(up)


def test_summax_mean_unit_counts():
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("ones"), 10)
    x = ps.draw(s, 40000, seed=1)
    mean = math.sqrt(2 / math.pi) * sum(2.0**-k for k in range(1, 11))
    assert abs(x.mean() - mean) < 4 * x.std() / math.sqrt(x.size)


def test_summax_sandwich_small_case():
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("dyadic"), 8)
    e = 1.5
    m = ps.mc_small_dev(s, e, 20000, seed=3)
    assert ps.level_chain_lower(s, e) <= math.log(m.ci_high)
    assert ps.summax_upper(s, e) >= math.log(m.ci_low)


def test_tree_depth_one_is_max_of_two():
    s = ProcessSpec("BinaryTree", G, Rule("power_log"), truncation_depth=1)
    x = ps.draw(s, 4000, seed=2)
    cdf = lambda r: dist1d.cdf_abs(G, 2 * r) ** 2  # noqa: E731 sigma_1 = 1/2
    assert stats.kstest(x, np.vectorize(cdf)).pvalue > 1e-3


def test_tree_sup_below_levelmax_pathwise():
    s = ProcessSpec("BinaryTree", Law.stable(1.5), Rule("power_log"), truncation_depth=8)
    sup, lm = ps.sample_tree(s, np.random.default_rng(0), 500, with_levelmax=True)
    assert np.all(sup <= lm + 1e-12)


def test_tree_chunking_does_not_change_draws():
    s = ProcessSpec("BinaryTree", G, Rule("power_log"), truncation_depth=6)
    a = ps.sample_tree(s, np.random.default_rng(5), 50)
    b = ps.sample_tree(s, np.random.default_rng(5), 50, chunk_nodes=2**8)
    assert a.shape == b.shape and np.all(a > 0) and np.all(b > 0)


def test_tree_bounds_bracket_mc():
    s = ProcessSpec("BinaryTree", G, Rule("power_log"), truncation_depth=10)
    e = 0.8
    m = ps.mc_small_dev(s, e, 20000, seed=0)
    assert ps.level_chain_lower(s, e) <= math.log(m.ci_high)
    assert ps.tree_levelmax_upper(s, e) >= math.log(m.ci_low)
    assert ps.tree_upper_bound_gauss(s, e)[0] >= math.log(m.ci_low)


def test_clopper_pearson_width_scales():
    w1 = np.subtract(*ps.clopper_pearson(250, 1000)[::-1])
    w2 = np.subtract(*ps.clopper_pearson(2500, 10000)[::-1])
    assert w1 / w2 == pytest.approx(math.sqrt(10), rel=0.05)


def test_mc_independent_of_workers():
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log"), Rule("dyadic"), 6)
    a = ps.draw(s, 70000, seed=11, workers=1)
    b = ps.draw(s, 70000, seed=11, workers=3)
    assert np.array_equal(a, b)


def test_zero_samples_rejected_and_deep_window_warns():
    with pytest.raises(ValueError):
        ps.mc_small_dev(indep_gauss(), 0.1, 0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        m = ps.mc_small_dev(indep_gauss(), 1e-3, 1000)
    assert m.warning == "WindowTooDeep" and any(issubclass(x.category, ps.WindowTooDeep) for x in w)


def test_truncation_report():
    r = ps.truncation_report(ProcessSpec("IndepSequence", G, Rule("power_log")), 0.1, 20)
    assert r["ok"] and r["tail"] < r["target"]
    rep = ps.choose_depth(ProcessSpec("IndepSequence", G, Rule("power_log")), 0.1, 60)
    assert rep["ok"] and rep["depth"] <= 20


def test_fit_rate_recovers_synthetic_exponent():
    eps = np.geomspace(1e-4, 1e-1, 10)
    pts = [(e, -3.0 * e**-2 * math.log(1 / e) ** 0.5) for e in eps]
    f = ps.fit_rate(pts)
    assert f.expr.a == pytest.approx(2.0, abs=1e-6) and f.expr.b == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ValueError):
        ps.fit_rate(pts[:3])
    with pytest.raises(ValueError):
        ps.fit_rate([(e, v) for e, v in pts if e > 0.02])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-2, 2))
def test_fit_rate_exact_power_laws(a, b):
    eps = np.geomspace(1e-5, 1e-2, 8)
    f = ps.fit_rate([(e, -(e**-a) * math.log(1 / e) ** b) for e in eps])
    assert f.expr.a == pytest.approx(a, abs=1e-6) and f.expr.b == pytest.approx(b, abs=1e-5)


def test_boundedness_examples():
    s = ProcessSpec("SumOfMaxima", Law.stable(1.5), Rule("power_log", gamma=1.5, beta=1.2), Rule("dyadic"))
    assert ps.boundedness(s) == "Unbounded"
    s = ProcessSpec("SumOfMaxima", G, Rule("power_log", gamma=2.0, beta=2.0), Rule("power_log", gamma=2.0, beta=2.0))
    assert ps.boundedness(s) == "Unbounded"
    s = ProcessSpec("BinaryTree", Law.stable(1.5), Rule("power_log", gamma=1.5, beta=1.2))
    assert ps.boundedness(s) == "Unknown"
    assert ps.boundedness(ProcessSpec("IndepSequence", G, Rule("power_log"))) == "Bounded"
    s = ProcessSpec("IndepSequence", Law.stable(1.0), Rule("stable_critical", beta=1.0))
    assert ps.boundedness(s) == "Unbounded"
