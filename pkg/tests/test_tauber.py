import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from smalldev import dist1d, tauber
from smalldev.tauber import NO_BOUND, AsymptoticExpr


def lam_expr(b=0.0, d=0.0):
    return AsymptoticExpr("log_p", "lambda", a=1.0, b=b, d=d)


def test_taub_convert_power_log():
    out = tauber.taub_convert(lam_expr(b=-2.0, d=4.0))
    assert (out.depth, out.a, out.b) == ("loglog_p", 0.5, 2.0)


def test_taub_convert_loglog_shape():
    out = tauber.taub_convert(lam_expr(d=-3.0))
    assert out.depth == "logloglog_p" and out.a == pytest.approx(1 / 3)


def test_taub_convert_rejects_other_shapes():
    with pytest.raises(tauber.ShapeMismatch):
        tauber.taub_convert(AsymptoticExpr("log_p", "lambda", a=0.5))
    with pytest.raises(tauber.ShapeMismatch):
        tauber.taub_convert(lam_expr(b=1.0))


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 10), st.floats(-5, 5))
def test_taub_round_trip(tau, theta):
    e = lam_expr(b=-tau, d=theta)
    back = tauber.taub_invert(tauber.taub_convert(e))
    assert back.b == pytest.approx(e.b) and back.d == pytest.approx(e.d)


def test_debruijn_exponents():
    out = tauber.debruijn_convert(AsymptoticExpr("log_p", "lambda", a=0.5, c=1.0))
    assert out.a == pytest.approx(1.0) and out.c == pytest.approx(0.25)
    out = tauber.debruijn_convert(AsymptoticExpr("log_p", "lambda", a=0.5, b=1.0))
    assert out.a == pytest.approx(1.0) and out.b == pytest.approx(2.0)


def test_debruijn_against_levy_law():
    # Levy law with E exp(-lam V) = exp(-sqrt(lam)): P(V <= eps) = erfc(1 / (2 sqrt(eps)))
    cp = tauber.debruijn_constant(0.5, 1.0)
    for eps in (1e-2, 1e-3, 1e-4):
        x = 1 / (2 * math.sqrt(eps))
        logp = math.log(special.erfcx(x)) - x * x
        assert -logp * eps == pytest.approx(cp, rel=2 * math.sqrt(eps) * 10)


def gauss_abs_laplace(lam):
    return math.log(2.0) + 0.5 * lam * lam + stats.norm.logcdf(-lam)


def test_chebyshev_deterministic_variable():
    b, _ = tauber.chebyshev_upper(0.5, lambda lam: -lam)
    assert b < -1e6


def test_chebyshev_gaussian_abs():
    logp = math.log(dist1d.cdf_abs(dist1d.Law.gaussian(), 0.1))
    assert logp == pytest.approx(math.log(0.0797), abs=1e-3)
    b, _ = tauber.chebyshev_upper(0.1, gauss_abs_laplace)
    assert logp <= b <= logp / 3


def test_lower_bound_degenerate_zero():
    b, lam = tauber.laplace_to_prob_lower(1.0, lambda lam: 0.0)
    assert b == pytest.approx(math.log(-math.expm1(-lam)))
    assert b > -1e-6


def test_lower_bound_gaussian_abs():
    logp = math.log(dist1d.cdf_abs(dist1d.Law.gaussian(), 1.0))
    b, _ = tauber.laplace_to_prob_lower(1.0, gauss_abs_laplace)
    assert b is not NO_BOUND
    assert 5 * logp <= b <= logp


def test_lower_bound_uninformative():
    # E exp(-lam V) <= exp(-lam eps) whenever V >= eps surely
    b, lam = tauber.laplace_to_prob_lower(0.5, lambda lam: -lam, max_decades=3)
    assert b is NO_BOUND and lam is None


def test_expr_round_trip_and_magnitude():
    e = AsymptoticExpr("loglog_p", "eps", a=2.0, b=1.0, c=3.0)
    assert AsymptoticExpr.from_dict(e.to_dict()) == e
    x = 1e-5
    assert e.log_magnitude(x) == pytest.approx(math.log(3.0) + 2 * math.log(1e5) + math.log(math.log(1e5)))
    with pytest.raises(ValueError):
        AsymptoticExpr("log_q")
