import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodallab import eigenmodes as em
from nodallab import lpnorms
from nodallab.errors import DomainError, InsufficientSweepError


def test_l2_is_one(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (3, 1))
    assert lpnorms.lp_norm(f, 2) == pytest.approx(1, abs=1e-8)


def test_l4_of_sin(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (1, 0))
    assert lpnorms.lp_norm(f, 4) == pytest.approx((3 / (8 * math.pi**2)) ** 0.25, rel=1e-10)


@pytest.mark.parametrize("p", [1, 3, 7.5])
def test_constant_on_sphere(sphere, sphere_q128, p):
    f = em.constant_field(sphere, sphere_q128, -2.0)
    assert lpnorms.lp_norm(f, p) == pytest.approx(2 * (4 * math.pi) ** (1 / p), rel=1e-10)
    assert lpnorms.lp_norm(f, math.inf) == 2


def test_p_below_one(sphere, sphere_q128):
    with pytest.raises(DomainError):
        lpnorms.lp_norm(em.constant_field(sphere, sphere_q128), 0.5)


def test_exponents():
    assert lpnorms.sogge_exponent(2, 6) == pytest.approx(1 / 12, abs=1e-15)
    assert lpnorms.sogge_exponent(3, 4) == pytest.approx(1 / 8, abs=1e-15)
    assert lpnorms.sogge_exponent(2, 10) == pytest.approx(3 / 20, abs=1e-15)
    assert lpnorms.critical_p(2) == 6
    assert lpnorms.critical_p(3) == 4
    assert 2 < lpnorms.critical_p(10**6) < 2.00001


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_continuity_at_critical_p(n):
    p = lpnorms.critical_p(n)
    low = (n - 1) * (p - 2) / (8 * p)
    high = (n * (p - 2) - p) / (4 * p)
    assert abs(low - high) < 1e-12
    assert abs(lpnorms.sogge_exponent(n, p * (1 + 1e-13)) - lpnorms.sogge_exponent(n, p)) < 1e-12


def test_loglog_fit_examples():
    fit = lpnorms.loglog_fit([(1, 1), (4, 2), (16, 4)])
    assert fit.slope == pytest.approx(0.5, abs=1e-14)
    assert fit.r2 == 1
    assert lpnorms.loglog_fit([(1, 3), (2, 3), (5, 3)]).slope == pytest.approx(0, abs=1e-14)
    lam = [1, 3, 9, 27, 81]
    fit = lpnorms.loglog_fit([(x, 3 * x**0.75) for x in lam])
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    with pytest.raises(DomainError):
        lpnorms.loglog_fit([(1, 1), (2, 0), (3, 1)])
    with pytest.raises(InsufficientSweepError):
        lpnorms.loglog_fit([(1, 1), (2, 2)])


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 10), st.lists(st.floats(1, 1e4), min_size=3,
                                                      max_size=8, unique=True))
def test_loglog_fit_recovers_power_laws(e, c, lam):
    if max(lam) / min(lam) < 1.5:
        return
    fit = lpnorms.loglog_fit([(x, c * x**e) for x in lam])
    assert fit.slope == pytest.approx(e, abs=1e-9)


def test_lp_scaling_needs_sweep(sphere, sphere_q128):
    fs = [em.sphere_harmonic(sphere, sphere_q128, l) for l in (2, 3, 4)]
    with pytest.raises(InsufficientSweepError):
        lpnorms.lp_scaling(fs, 4)
