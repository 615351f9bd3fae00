import math
import warnings

import numpy as np
import pytest

from nodallab import eigenmodes as em
from nodallab import geometry as geo
from nodallab import nodal as nd
from nodallab.errors import DomainError, InsufficientSweepError

from conftest import zonal_nodal_length


@pytest.mark.parametrize("k", [1, 4, 16])
def test_torus_sin_total(torus2, torus2_q256, k):
    f = em.torus_mode(torus2, torus2_q256, (k, 0))
    est = nd.extract_nodal(f, 1024)
    assert est.total == pytest.approx(4 * math.pi * k, rel=5e-3)
    assert est.total == pytest.approx(est.measures.sum(), rel=1e-10)


def test_pieces_end_on_zero_crossings(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (3, 2))
    est = nd.extract_nodal(f, 128)
    ends = est.pieces.reshape(-1, 2)
    h = 2 * math.pi / 128
    # each endpoint lies on a cell edge: a grid line or a square's diagonal
    g = np.column_stack([ends / h, ends.sum(axis=1) / h, (ends[:, 0] - ends[:, 1]) / h])
    on_line = np.min(np.abs(g - np.round(g)), axis=1)
    assert np.max(on_line) < 1e-9
    # and the field is small there (linear interpolation error only)
    assert np.max(np.abs(f.evaluate(ends))) < 0.01 * np.max(np.abs(f.values))


def test_zonal_l1_equator(sphere, sphere_q128):
    f = em.sphere_harmonic(sphere, sphere_q128, 1)
    assert nd.extract_nodal(f, 256).total == pytest.approx(2 * math.pi, rel=0.01)


@pytest.mark.parametrize("l", [2, 5, 9, 20])
def test_zonal_legendre_oracle(sphere, sphere_q128, l):
    f = em.sphere_harmonic(sphere, sphere_q128, l)
    assert nd.extract_nodal(f, 256).total == pytest.approx(zonal_nodal_length(l), rel=0.01)


def test_torus3_planes():
    m = geo.flat_torus(3)
    q = geo.build_quadrature(m, 64)
    f = em.torus_mode(m, q, (2, 0, 0))
    # sin(2x) = 0 on four planes of area (2 pi)^2
    assert nd.extract_nodal(f, 64).total == pytest.approx(4 * (2 * math.pi) ** 2, rel=1e-3)


def test_mesh_extraction(ico3):
    from nodallab.mesh_spectrum import assemble, lowest_eigenpairs, to_field

    q = geo.build_quadrature(ico3, 0)
    pairs = lowest_eigenpairs(assemble(ico3), 4)
    est = nd.extract_nodal(to_field(pairs[1], ico3, q))
    # an l = 1 mode vanishes on a great circle
    assert est.total == pytest.approx(2 * math.pi, rel=0.02)


def test_empty_estimate_warns(torus2, torus2_q256):
    f = em.field_from_evaluator(torus2, torus2_q256, lambda p: 2 + np.sin(p[:, 0]), 1.0)
    with pytest.warns(RuntimeWarning):
        est = nd.extract_nodal(f, 64)
    assert est.total == 0
    assert nd.nodal_in_ball(est, [0, 0], 1.0) == 0


def test_extraction_needs_resolution(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (1, 0))
    with pytest.raises(DomainError):
        nd.extract_nodal(f, 32)


def test_nodal_in_ball(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (1, 0))
    est = nd.extract_nodal(f, 1024)
    assert nd.nodal_in_ball(est, [0.0, 1.3], 1.0) == pytest.approx(2.0, rel=0.02)
    assert nd.nodal_in_ball(est, [math.pi / 2, 1.0], 1.0) == 0
    assert nd.nodal_in_ball(est, [1.0, 1.0], 5.0) == pytest.approx(est.total, rel=1e-12)


def test_nodal_in_ball_sphere(sphere, sphere_q128):
    f = em.sphere_harmonic(sphere, sphere_q128, 1)
    est = nd.extract_nodal(f, 512)
    # ball of radius pi/2 about an equator point holds half the equator
    assert nd.nodal_in_ball(est, [1.0, 0.0, 0.0], math.pi / 2) == pytest.approx(math.pi, rel=0.01)
    assert nd.nodal_in_ball(est, [0.0, 0.0, 1.0], 1.0) == 0
    assert nd.nodal_in_ball(est, [0.0, 0.0, 1.0], math.pi) == pytest.approx(est.total)


def test_nodal_in_balls_matches_brute_force(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (3, 2))
    est = nd.extract_nodal(f, 256)
    rng = np.random.default_rng(4)
    centers = rng.uniform(0, 2 * math.pi, (12, 2))
    got = nd.nodal_in_balls(est, centers, 0.8)
    mids = est.midpoints
    for c, g in zip(centers, got):
        inside = geo.distance(torus2, c, mids) <= 0.8
        # midpoint counting differs from the clipped sum only on boundary pieces
        assert g == pytest.approx(est.measures[inside].sum(), abs=2 * 2 * math.pi / 256)


def test_sign_volumes_and_masses(torus2, torus2_q256):
    f = em.torus_mode(torus2, torus2_q256, (1, 0))
    c = [0.0, 2.0]
    vp, vm = nd.sign_volumes(f, c, 0.7)
    vol = geo.ball_volume(torus2, torus2_q256, c, 0.7)
    assert vp == pytest.approx(vm, rel=0.01)
    assert vp + vm <= vol + 1e-12
    ip, im, ia = nd.sign_masses(f, c, 0.7)
    assert ip == pytest.approx(im, rel=1e-9)
    assert ip + im == pytest.approx(ia, rel=1e-12)
    assert nd.sign_volumes(f, [math.pi / 2, 0.0], 0.5)[1] == 0


def test_zonal_l2_sign_volumes(sphere, sphere_q256):
    f = em.sphere_harmonic(sphere, sphere_q256, 2)
    x = 1 / math.sqrt(3)
    c = [math.sqrt(1 - x * x), 0.0, x]
    vp, vm = nd.sign_volumes(f, c, 0.2)
    vol = geo.ball_volume(sphere, sphere_q256, c, 0.2)
    assert min(vp, vm) >= 0.2 * vol


def test_zonal_l10_sign_masses(sphere, sphere_q256):
    from nodallab import covering as cv
    from conftest import legendre_roots

    f = em.sphere_harmonic(sphere, sphere_q256, 10)
    x = legendre_roots(10)[3]
    c = [math.sqrt(1 - x * x), 0.0, x]
    r = cv.wavelength_radius(cv.zero_spacing_scale(f), f.eigenvalue)
    ip, im, ia = nd.sign_masses(f, c, r)
    assert min(ip, im) >= (1 / 3 - 0.02) * ia


def test_isoperimetric_link(sphere, sphere_q256):
    f = em.sphere_harmonic(sphere, sphere_q256, 1)
    est = nd.extract_nodal(f, 512)
    lhs, rhs = nd.isoperimetric_link(est, f, [1.0, 0.0, 0.0], math.pi / 2)
    assert lhs == pytest.approx(math.pi, rel=0.01)
    # the hemisphere about an equator point splits into two quarter spheres
    assert rhs == pytest.approx(math.sqrt(math.pi), rel=0.01)
    _, zero = nd.isoperimetric_link(est, f, [0.0, 0.0, 1.0], 0.5)
    assert zero == 0


def test_isoperimetric_ratio_resolution_invariant(sphere):
    ratios = []
    for res in (128, 256):
        q = geo.build_quadrature(sphere, res)
        f = em.sphere_harmonic(sphere, q, 4)
        est = nd.extract_nodal(f, 2 * res)
        x = float(np.max(np.abs(np.polynomial.legendre.Legendre.basis(4).roots())))
        lhs, rhs = nd.isoperimetric_link(est, f, [math.sqrt(1 - x * x), 0, x], 0.4)
        ratios.append(lhs / rhs)
    assert ratios[0] == pytest.approx(ratios[1], rel=0.05)


def test_total_vs_theorem(sphere, sphere_q128):
    from conftest import zonal_nodal_length as oracle

    samples = [(l * (l + 1), oracle(l)) for l in (4, 8, 12, 16, 24)]
    fit, c = nd.total_vs_theorem(samples, 2)
    assert fit.slope == pytest.approx(0.5, abs=0.05)
    assert c > 0
    with pytest.raises(InsufficientSweepError):
        nd.total_vs_theorem(samples[:3], 2)
