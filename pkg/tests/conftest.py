import math

import numpy as np
import pytest

from nodallab import geometry as geo


@pytest.fixture(scope="session")
def torus2():
    return geo.flat_torus(2)


@pytest.fixture(scope="session")
def torus2_q256(torus2):
    return geo.build_quadrature(torus2, 256)


@pytest.fixture(scope="session")
def sphere():
    return geo.round_sphere()


@pytest.fixture(scope="session")
def sphere_q128(sphere):
    return geo.build_quadrature(sphere, 128)


@pytest.fixture(scope="session")
def sphere_q256(sphere):
    return geo.build_quadrature(sphere, 256)


@pytest.fixture(scope="session")
def ico3():
    v, t = geo.icosphere(3)
    return geo.mesh_surface(v, t)


def legendre_roots(l):
    """Roots of P_l from numpy's Legendre series class (independent of the
    package's recurrence)."""
    c = np.zeros(l + 1)
    c[l] = 1.0
    return np.polynomial.legendre.Legendre(c).roots().real


def zonal_nodal_length(l):
    x = legendre_roots(l)
    return float(np.sum(2.0 * math.pi * np.sqrt(1.0 - x * x)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
