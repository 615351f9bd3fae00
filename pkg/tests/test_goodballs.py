import math
import warnings

import numpy as np
import pytest

from nodallab import covering as cv
from nodallab import eigenmodes as em
from nodallab import geometry as geo
from nodallab import goodballs as gb
from nodallab.errors import DomainError, InsufficientSweepError


def test_ball_mass(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (1, 0))
    assert gb.ball_mass(f, [0, 0], 10.0) == pytest.approx(1, abs=1e-8)
    g = em.torus_mode(torus2, torus2_q256, (4, 0))
    # two disjoint balls: masses add
    a = gb.ball_mass(g, [1, 1], 0.5)
    b = gb.ball_mass(g, [4, 4], 0.5)
    both = geo.ball_reduce(torus2, torus2_q256, np.array([[1, 1], [4, 4]]), 0.5,
                           torus2_q256.weights * g.values**2)[0][:, 0].sum()
    assert a + b == pytest.approx(both, rel=1e-12)


def test_half_torus_strip_mass(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (1, 0))
    x = torus2_q256.points[:, 0]
    strip = (x >= 0) & (x < math.pi)
    assert torus2_q256.integrate(np.where(strip, f.values**2, 0)) == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("c_m,d", [(4, 4.0), (1, 2.0), (36, math.log2(144))])
def test_choose_d(c_m, d):
    assert gb.choose_d(c_m) == pytest.approx(d, abs=1e-12)


def test_constant_field_all_good(torus2, torus2_q256):
    f = em.constant_field(torus2, torus2_q256)
    c = cv.build_cover(torus2, torus2_q256, 0.5)
    rep = gb.classify(f, c, 2.05)
    assert rep.n_good == len(c)


def test_torus_sin8x_all_good(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (8, 0))
    c = cv.build_cover(torus2, torus2_q256, (3 * math.pi / 2) / 8)
    rep = gb.classify(f, c, 6)
    w2 = torus2_q256.weights * f.values**2
    for i in range(0, len(c), 7):
        mb = gb.ball_mass(f, c.centers[i], c.radius)
        m2b = gb.ball_mass(f, c.centers[i], 2 * c.radius)
        assert rep.good[i] == (m2b <= 64 * mb)
        assert rep.mass_b[i] == pytest.approx(mb, rel=1e-12)
    assert rep.n_good == len(c)
    assert rep.mass_good == pytest.approx(1, abs=1e-6)
    assert np.sum(rep.mass_b[rep.good]) >= rep.mass_good
    assert gb.good_mass_check(rep) == pytest.approx(1, abs=1e-6)
    assert np.sum(w2) == pytest.approx(1, abs=1e-8)


@pytest.fixture(scope="module")
def beam40(sphere, sphere_q256):
    f = em.sphere_harmonic(sphere, sphere_q256, 40, "beam")
    a = 1.1 * cv.zero_spacing_scale(f)
    c = cv.build_cover(sphere, sphere_q256, cv.wavelength_radius(a, f.eigenvalue))
    c_m, _ = cv.overlap_multiplicity(c, sphere_q256)
    return f, c, gb.classify(f, c, gb.choose_d(c_m))


def test_beam_concentrates_on_equator(beam40):
    f, c, rep = beam40
    far = np.abs(c.centers[:, 2]) > 0.6
    assert rep.mass_b[far].sum() < 1e-6
    assert gb.good_mass_check(rep) >= 0.75
    assert 0 <= rep.mass_good <= 1 + 1e-6
    assert rep.vol_good <= 4 * math.pi


def test_beam_holder_chain(beam40):
    f, c, rep = beam40
    lhs, rhs = gb.holder_chain_check(f, rep, 6)
    assert lhs <= rhs
    norm6 = rhs / rep.vol_good ** (4 / 6)
    floor = gb.volume_floor(0.75, math.sqrt(norm6), 6)
    assert rep.vol_good >= floor


def test_holder_equality_for_constant(torus2, torus2_q256):
    f = em.constant_field(torus2, torus2_q256, 1 / (2 * math.pi))
    c = cv.build_cover(torus2, torus2_q256, 5.0)
    rep = gb.classify(f, c, 3)
    lhs, rhs = gb.holder_chain_check(f, rep, 4)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_d_to_infinity(beam40):
    f, c, _ = beam40
    assert gb.classify(f, c, 200).mass_good == pytest.approx(1, abs=1e-6)


def test_zero_mass_ball_warns(torus2, torus2_q256):
    vals = np.where(torus2_q256.points[:, 0] < math.pi, 1.0, 0.0)
    f = em.SampledField(torus2, torus2_q256, vals, 1.0)
    c = cv.build_cover(torus2, torus2_q256, 0.5)
    with pytest.warns(RuntimeWarning):
        rep = gb.classify(f, c, 3)
    assert not np.any(rep.good[rep.mass_b == 0])


def test_mass_check_reports_violation(beam40):
    f, c, rep = beam40
    with pytest.warns(gb.LemmaViolation) as rec:
        gb.good_mass_check(rep, floor=1.5)
    assert "mass_B" in rec[0].message.table


def test_sobolev(torus2):
    m3 = geo.flat_torus(3)
    q = geo.build_quadrature(m3, 64)
    f = em.torus_mode(m3, q, (1, 1, 1))
    lhs, rhs = gb.sobolev_check(f, np.ones(len(q), bool))
    assert lhs == pytest.approx(1, abs=1e-8)
    assert rhs == pytest.approx((2 * math.pi) ** 2 * 3, rel=1e-10)
    assert rhs == pytest.approx(118.4, abs=0.1)
    assert gb.sobolev_check(f, np.zeros(len(q), bool)) == (0.0, 0.0)
    q2 = geo.build_quadrature(torus2, 64)
    with pytest.raises(DomainError):
        gb.sobolev_check(em.torus_mode(torus2, q2, (1, 0)), np.ones(len(q2), bool))


def test_count_scaling_needs_sweep():
    with pytest.raises(InsufficientSweepError):
        gb.count_good_scaling([(1, 1), (2, 2), (4, 3)])
    fit = gb.count_good_scaling([(x, 2 * x) for x in (1, 2, 4, 8, 16)])
    assert fit.slope == pytest.approx(1)


def test_volume_exponent():
    assert gb.volume_exponent(2, 6) == pytest.approx(-0.25)
