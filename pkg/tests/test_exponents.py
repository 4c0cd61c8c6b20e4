import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landaulab import exponents as ex


def test_moment_threshold_spot_values():
    assert ex.moment_threshold(Fraction(2)) == 9
    assert ex.moment_threshold(Fraction(3)) == 6
    assert ex.moment_threshold(2.0) == pytest.approx(9.0, abs=1e-14)


def test_moment_threshold_pole():
    with pytest.raises(ex.DomainError):
        ex.moment_threshold(Fraction(3, 2))
    with pytest.raises(ex.DomainError):
        ex.moment_threshold(1.2)


def test_interpolation_thetas_exact_spot():
    t1, t2, t3 = ex.interpolation_thetas(Fraction(2), Fraction(10))
    assert (t1, t2, t3) == (Fraction(20, 31), Fraction(8, 31), Fraction(3, 31))
    # third constraint: -(3/p) t1 + m t3 = 0
    assert -Fraction(3, 2) * t1 + 10 * t3 == 0


def test_alpha_exponents_rational_oracle():
    # independent recomputation by rational arithmetic: alpha1 = 3 t2/(2 - 3 t1)
    p, m = Fraction(2), Fraction(10)
    den = (p + 1) * (2 * p * m - 9 * p + 9)
    t1 = 3 * m * p / den
    t2 = (2 * p * p * m - 9 * p * p - m * p) / den
    alpha1_oracle = (p + 1) * t2 / (p - (p + 1) * t1)
    *_, a1, a2 = ex.interpolation_exponents(p, m)
    assert a1 == alpha1_oracle == 12
    assert a2 == 9


def test_alpha_requires_stricter_threshold():
    # thetas exist for m > 9p/(2p-1) = 6 but alphas need m > m*(p) = 9
    ex.interpolation_thetas(Fraction(2), Fraction(7))
    with pytest.raises(ex.DomainError):
        ex.interpolation_exponents(Fraction(2), Fraction(7))


def test_degiorgi_exponents_spot_and_boundary():
    beta, gamma = ex.degiorgi_exponents(Fraction(2), Fraction(10))
    assert beta == Fraction(11, 30)
    assert gamma == Fraction(1, 30)
    with pytest.raises(ex.DomainError):
        ex.degiorgi_exponents(Fraction(2), Fraction(9))  # m = m* exactly


def test_degiorgi_limits_large_m():
    beta, gamma = ex.degiorgi_exponents(Fraction(2), Fraction(10 ** 12))
    assert abs(float(beta) - 2.0 / 3.0) < 1e-11
    assert abs(float(gamma) - 1.0 / 3.0) < 1e-11


def test_smoothing_exponent_spot():
    gt, bs = ex.smoothing_exponent(Fraction(2), Fraction(10))
    assert gt == Fraction(41, 900)
    assert bs == Fraction(30, 31)
    assert abs(float(bs) - 0.96774) < 1e-5
    assert 0.75 < float(bs) < 1.0


def test_smoothing_exponent_limit_endpoint():
    # m -> infinity: gamma~ -> gamma at p~ = 7/3 with m = inf, i.e. 5/9,
    # and beta* -> (5/3)/(5/3 + 5/9) = 3/4 = 3/(2p)
    _, bs = ex.smoothing_exponent(Fraction(2), Fraction(10 ** 9))
    assert abs(float(bs) - 0.75) < 1e-6


def test_gamma_monotone_near_threshold():
    prev = 0.0
    for eps in (1e-6, 1e-4, 1e-2, 1.0):
        _, gamma = ex.degiorgi_exponents(2.0, 9.0 + eps)
        assert gamma > prev
        prev = gamma
    assert prev < 1.0 / 3.0


def test_prodi_serrin_classify_spot():
    cls = ex.prodi_serrin_classify(Fraction(2), Fraction(5), Fraction(40))
    assert cls.subcritical
    assert cls.r_infimum == 4.0
    assert cls.p_alpha1_minus_p == pytest.approx(142.0 / 31.0, rel=1e-14)
    assert cls.gronwall_ok


def test_prodi_serrin_critical_pair():
    cls = ex.prodi_serrin_classify(Fraction(2), Fraction(4), Fraction(40))
    assert cls.label == "critical"
    assert not cls.subcritical


def test_prodi_serrin_infinite_r():
    cls = ex.prodi_serrin_classify(3.0, math.inf, 7.0)
    assert cls.criticality == pytest.approx(1.0)
    assert cls.label == "subcritical"
    assert cls.m_star == pytest.approx(6.0)


def test_barrier_spot_and_scaling():
    beta, gamma = 11.0 / 30.0, 1.0 / 30.0
    b = ex.degiorgi_barrier(1.0, 0.1, beta, gamma, 0.5)
    assert b.Q == pytest.approx(2.0 ** (42.0 / 11.0), rel=1e-13)
    b2 = ex.degiorgi_barrier(1.0, 0.1, beta, gamma, 1.0)
    # doubling C1 multiplies K by max(2^{1/gamma}, 2^{1/(1+beta+gamma)}) = 2^{1/gamma}
    assert b2.K / b.K == pytest.approx(2.0 ** (1.0 / gamma), rel=1e-10)


def test_barrier_vanishes_with_a0():
    beta, gamma = 0.5, 0.2
    ks = [ex.degiorgi_barrier(a0, 1.0, beta, gamma, 1.0).K for a0 in (1.0, 1e-4, 1e-8)]
    assert ks[0] > ks[1] > ks[2]
    # in the small-A0 branch K scales like A0^{beta/(gamma+1+beta)}
    expected = (1e-8 / 1e-4) ** (beta / (gamma + 1.0 + beta))
    assert ks[2] / ks[1] == pytest.approx(expected, rel=1e-10)
    assert ex.degiorgi_barrier(1e-300, 1.0, beta, gamma, 1.0).K < 1e-30


def test_barrier_rejects_nonpositive():
    for bad in [dict(A0=0.0), dict(t=-1.0), dict(beta=0.0), dict(gamma=0.0), dict(C1=0.0)]:
        kwargs = dict(A0=1.0, t=1.0, beta=0.4, gamma=0.1, C1=1.0)
        kwargs.update(bad)
        with pytest.raises(ex.DomainError):
            ex.degiorgi_barrier(**kwargs)


def test_barrier_reversed_recurrence_random():
    rng = random.Random(7)
    for _ in range(100):
        p = 1.5 + rng.uniform(0.02, 6.0)
        m = float(ex.moment_threshold(p)) * (1.0 + rng.uniform(0.01, 5.0))
        beta, gamma = ex.degiorgi_exponents(p, m)
        b = ex.degiorgi_barrier(10 ** rng.uniform(-3, 3), 10 ** rng.uniform(-3, 0),
                                float(beta), float(gamma), 10 ** rng.uniform(-2, 2),
                                n_max=12)
        for n in range(13):
            assert b.reversed_recurrence_margin(n) >= -1e-12 * b.A0


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1.52, 12.0), excess=st.floats(1e-3, 50.0))
def test_exponent_set_invariants_hypothesis(p, excess):
    m = ex.moment_threshold(p) * (1.0 + excess)
    es = ex.ExponentSet.from_pm(p, m)
    assert abs(es.theta1 + es.theta2 + es.theta3 - 1.0) < 1e-14
    for theta in (es.theta1, es.theta2, es.theta3):
        assert 0.0 < theta < 1.0
    assert es.alpha1 > 1.0
    assert es.gamma > 0.0
    assert 1.5 / p < es.beta_star < 1.0


def test_exponent_set_csv_and_header():
    es = ex.ExponentSet.from_pm(Fraction(2), Fraction(10))
    assert ex.CSV_HEADER.startswith("p,m,theta1")
    row = es.csv_row()
    values = row.split(",")
    assert len(values) == len(ex.CSV_HEADER.split(","))
    assert float(values[ex.CSV_HEADER.split(",").index("beta_star")]) == pytest.approx(
        30.0 / 31.0, abs=1e-15)
