import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from smalldev import entropy
from smalldev.entropy import DIVERGENT


def test_profile_values():
    assert entropy.eval_profile(entropy.polynomial(1.0), 2.0) == 1.0
    assert entropy.eval_profile(entropy.log_power(1.0), math.exp(-3)) == pytest.approx(3.0)
    p = entropy.critical_stable(1.0, 2.0, sigma=math.exp(-1))
    assert entropy.eval_profile(p, math.exp(-2)) == pytest.approx(math.e**2 / 4)


def test_psi_tilde_log_power_closed_form():
    p = entropy.log_power(1.0)
    assert entropy.psi_tilde(p, math.exp(-10)) == pytest.approx(50.0, rel=1e-8)
    assert entropy.psi_tilde(p, 1.0) == 1.0
    # (1/2)|log eps|^2 is the leading term
    for k in (50, 500):
        assert entropy.psi_tilde(p, math.exp(-k)) / (0.5 * k * k) == pytest.approx(1.0, rel=1e-6)


def test_psi_tilde_against_quadrature():
    p = entropy.polynomial(0.7, C=2.0, sigma=0.5)
    eps = 1e-3
    ref, _ = integrate.quad(lambda u: entropy.eval_profile(p, u) / u, eps, 0.5, limit=200, points=[1e-2, 1e-1])
    assert entropy.psi_tilde(p, eps) == pytest.approx(ref, rel=1e-7)


def test_psi_hat_closed_forms():
    p = entropy.critical_stable(1.0, 3.0)
    assert entropy.psi_hat(p, math.exp(-4), 1.0) == pytest.approx(1.0, rel=1e-6)
    for e in (1e-3, 1e-30, 1e-300):
        assert entropy.psi_hat(p, e, 1.0) == pytest.approx(2 / math.sqrt(-math.log(e)), rel=1e-6)
    assert entropy.psi_hat(entropy.polynomial(0.5), 1.0, 1.0) == pytest.approx(4.0, rel=1e-6)


@pytest.mark.parametrize("beta", [1.0, 1.9, 2.0])
def test_psi_hat_divergent(beta):
    # (Psi(u)/u)^(1/2) = u^-1 |log u|^(-beta/2), non-integrable for beta <= 2
    assert entropy.psi_hat(entropy.critical_stable(1.0, beta), math.exp(-1), 1.0) is DIVERGENT


def test_regularity_examples():
    r = entropy.regularity_report(entropy.polynomial(1.0))
    assert r.c1_best == pytest.approx(2.0) and r.c2_best == pytest.approx(2.0)
    coarse = entropy.regularity_report(entropy.log_power(1.0), j_max=10).c1_best
    fine = entropy.regularity_report(entropy.log_power(1.0), j_max=200).c1_best
    assert 1.0 < fine < coarse
    cs = entropy.critical_stable(1.5, 2.0)
    r = entropy.regularity_report(cs, j_min=10, j_max=60)
    assert r.c2_best < 2**1.5


def test_classify_examples():
    d = entropy.classify_regime(entropy.exp_poly_log(1.0, 0.0), 2.0)
    assert "Thm3" in d.applicable
    assert d.predicted_rate["Thm3"].depth == "loglog_p" and d.predicted_rate["Thm3"].a == 2.0
    d = entropy.classify_regime(entropy.critical_stable(1.0, 1.5, sigma=math.exp(-3)), 1.0)
    assert "Thm8" in d.applicable and d.predicted_rate["Thm8"].a == pytest.approx(2.0)
    d = entropy.classify_regime(entropy.critical_stable(0.5, 0.5, sigma=math.exp(-3)), 0.5)
    assert not {"Thm4", "Thm5", "Thm8"} & set(d.applicable)
    d = entropy.classify_regime(entropy.polynomial(1.0), 2.0)
    assert {"Thm1", "Thm2"} <= set(d.applicable)


def test_boundedness_examples():
    assert entropy.boundedness_test(entropy.critical_stable(0.5, 1.2, sigma=math.exp(-3)), 0.5) == "Bounded"
    assert entropy.boundedness_test(entropy.critical_stable(1.5, 1.0, sigma=math.exp(-3)), 1.5) == "Unknown"
    assert entropy.boundedness_test(entropy.polynomial(0.5), 1.0) == "Bounded"


def test_tabulated_ingestion():
    p = entropy.ingest_tabulated([(1, 1), (0.5, 2), (0.25, 4)])
    assert entropy.eval_profile(p, 0.5) == pytest.approx(2.0)
    p = entropy.ingest_tabulated([(1, 1), (0.25, 4)])
    assert entropy.eval_profile(p, 0.5) == pytest.approx(2.0)
    with pytest.raises(entropy.IngestionError, match="psi < 1"):
        entropy.ingest_tabulated([(1, 1), (0.5, 0.5)])


def test_profile_csv(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("eps,psi\n1,1\n0.5,2\n0.25,4\n")
    assert entropy.eval_profile(entropy.read_profile_csv(f), 0.25) == pytest.approx(4.0)
    f.write_text("e,p\n1,1\n")
    with pytest.raises(entropy.IngestionError):
        entropy.read_profile_csv(f)


def test_majorant_is_non_increasing_and_bounds_profile():
    p = entropy.critical_stable(1.0, 3.0, sigma=math.exp(-3))
    x = np.linspace(-60, -3.0001, 500)
    m = entropy.log_psi_majorant(p, x)
    assert np.all(np.diff(m) <= 1e-12)
    assert np.all(m >= np.maximum(0.0, entropy.log_psi(p, x)) - 1e-12)


def test_unbounded_family_has_no_majorant():
    with pytest.raises(entropy.UnboundedProfile):
        entropy.log_psi_majorant(entropy.critical_stable(1.0, 3.0), -2.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-50, -0.01))
def test_polynomial_doubling(gamma, x):
    p = entropy.polynomial(gamma)
    assert entropy.log_psi(p, x - math.log(2)) - entropy.log_psi(p, x) == pytest.approx(gamma * math.log(2))


def test_profile_dict_round_trip():
    for p in (entropy.polynomial(1.5, 2.0, 0.3), entropy.ingest_tabulated([(1, 1), (0.5, 2), (0.25, 4)])):
        q = entropy.EntropyProfile.from_dict(p.to_dict())
        assert entropy.eval_profile(q, 0.1) == pytest.approx(entropy.eval_profile(p, 0.1))
