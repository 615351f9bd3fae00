import math

import numpy as np
import pytest

from nodallab import covering as cv
from nodallab import eigenmodes as em
from nodallab import geometry as geo
from nodallab.errors import DomainError, NoNodalSetError, ResolutionError


def brute_min_dist(m, pts, centers):
    return np.min(np.stack([geo.distance(m, c, pts) for c in centers]), axis=0)


def test_single_ball_cover(torus2, torus2_q256):
    c = cv.build_cover(torus2, torus2_q256, 5.0)
    assert len(c) == 1
    assert np.all(cv.covering_counts(c, torus2_q256) == 1)
    assert cv.overlap_multiplicity(c, torus2_q256)[0] == 1


def test_cover_r_pi(torus2):
    q = geo.build_quadrature(torus2, 64)
    c = cv.build_cover(torus2, q, math.pi)
    assert 2 <= len(c) <= 4
    assert np.all(brute_min_dist(torus2, q.points, c.centers) <= math.pi)


def test_sphere_cover_half_pi(sphere, sphere_q128):
    c = cv.build_cover(sphere, sphere_q128, math.pi / 2)
    for i in range(len(c)):
        for j in range(i):
            assert geo.distance(sphere, c.centers[i], c.centers[j]) >= math.pi / 2
    assert np.all(brute_min_dist(sphere, sphere_q128.points, c.centers) <= math.pi / 2 + 1e-12)


@pytest.mark.parametrize("r", [0.3, 0.7])
def test_packing_and_covering_certificates(torus2, torus2_q256, r):
    c = cv.build_cover(torus2, torus2_q256, r)
    d = np.stack([geo.distance(torus2, x, c.centers) for x in c.centers])
    d[np.diag_indices_from(d)] = np.inf
    assert d.min() >= r
    assert cv.covering_counts(c, torus2_q256).min() >= 1


def test_multiplicity_bound_and_oracle(torus2, torus2_q256):
    c = cv.build_cover(torus2, torus2_q256, math.pi / 8)
    mx, hist = cv.overlap_multiplicity(c, torus2_q256)
    assert mx <= 36
    pts = torus2_q256.points[::37]
    direct = np.sum(np.stack([geo.distance(torus2, x, pts) <= 2 * c.radius for x in c.centers]),
                    axis=0)
    counts = geo.ball_counts(torus2, torus2_q256, c.centers, 2 * c.radius)[::37]
    np.testing.assert_array_equal(direct, counts)
    assert hist.sum() == len(torus2_q256)


def test_multiplicity_stable_under_refinement(torus2):
    vals = []
    for res in (256, 512):
        q = geo.build_quadrature(torus2, res)
        vals.append(cv.overlap_multiplicity(cv.build_cover(torus2, q, math.pi / 8), q)[0])
    assert abs(vals[0] - vals[1]) <= 1


def test_cover_errors(torus2):
    q = geo.build_quadrature(torus2, 64)
    with pytest.raises(ResolutionError):
        cv.build_cover(torus2, q, 0.3)
    with pytest.raises(DomainError):
        cv.build_cover(torus2, q, 0.0)


@pytest.mark.parametrize("k", [4, 8, 16])
def test_zero_spacing_torus(torus2, k):
    q = geo.build_quadrature(torus2, 512)
    f = em.torus_mode(torus2, q, (k, 0))
    assert cv.zero_spacing_scale(f) == pytest.approx(3 * math.pi / 2, rel=0.02)


def test_zero_spacing_zonal_l1(sphere, sphere_q256):
    f = em.sphere_harmonic(sphere, sphere_q256, 1)
    assert cv.zero_spacing_scale(f) == pytest.approx(3 * math.sqrt(2) * math.pi / 2, rel=0.02)


def test_zero_spacing_needs_sign_change(torus2, torus2_q256):
    f = em.SampledField(torus2, torus2_q256, np.ones(len(torus2_q256)), 4.0)
    with pytest.raises(NoNodalSetError):
        cv.zero_spacing_scale(f)


def test_wavelength_radius():
    assert cv.wavelength_radius(3, 9) == 1
    assert cv.wavelength_radius(3 * math.pi / 2, 49) == pytest.approx(3 * math.pi / 14)
    assert cv.wavelength_radius(2.5, 1) == 2.5
    with pytest.raises(DomainError):
        cv.wavelength_radius(1.0, 0.5)


def test_nearest_zeros_lie_on_zero_set(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (3, 0))
    centers = torus2_q256.points[::4099]
    q, dist = cv.nearest_zeros(f, centers)
    assert np.max(np.abs(f.evaluate(q))) < 1e-12
    assert np.all(dist <= math.pi / 6 + 1e-9)
