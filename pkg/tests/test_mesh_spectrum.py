import math

import numpy as np
import pytest

from nodallab import geometry as geo
from nodallab.errors import ConvergenceError, DomainError, MeshQualityError, NotClosedError
from nodallab.mesh_spectrum import assemble, cluster_eigenvalues, lowest_eigenpairs, to_field


def test_assembly_invariants(ico3):
    op = assemble(ico3)
    S = op.stiffness.tocsr()
    assert abs(S - S.T).max() == 0
    assert np.max(np.abs(np.asarray(S.sum(axis=1)).ravel())) < 1e-10
    assert np.all(op.mass > 0)
    area = geo.triangle_areas(ico3.vertices, ico3.triangles).sum()
    assert abs(op.mass.sum() - area) < 1e-12


def test_tetrahedron_symmetry():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    t = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    S = assemble((v, t)).stiffness.toarray()
    off = S[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, off[0], rtol=1e-12)


def test_open_and_degenerate_meshes():
    v, t = geo.icosphere(1)
    with pytest.raises(NotClosedError):
        assemble((v, t[:-1]))
    v2 = np.vstack([v, v[0]])
    t2 = t.copy()
    t2[0] = [t[0, 0], t[0, 1], t[0, 1]]
    with pytest.raises(MeshQualityError):
        assemble((v2, t2))


def test_count_one_is_constant(ico3):
    (p,) = lowest_eigenpairs(assemble(ico3), 1)
    assert abs(p.eigenvalue) <= 1e-8
    assert np.std(p.vector) / np.abs(np.mean(p.vector)) < 1e-6


def test_convergence_cap(ico3):
    with pytest.raises(ConvergenceError) as exc:
        lowest_eigenpairs(assemble(ico3), 9, tol=1e-10, max_sweeps=1, degree=2)
    assert exc.value.best_residual > 0


def test_to_field(ico3):
    q = geo.build_quadrature(ico3, 0)
    pairs = lowest_eigenpairs(assemble(ico3), 4, seed=1)
    with pytest.raises(DomainError):
        to_field(pairs[0], ico3, q)
    f = to_field(pairs[1], ico3, q)
    assert f.eigenvalue == pairs[1].eigenvalue
    assert f.l2sq() == pytest.approx(1, abs=1e-8)
    coef, *_ = np.linalg.lstsq(ico3.vertices, f.values, rcond=None)
    corr = np.corrcoef(ico3.vertices @ coef, f.values)[0, 1]
    assert abs(corr) > 0.99


def test_clusters():
    class P:
        def __init__(self, e):
            self.eigenvalue = e

    cl = cluster_eigenvalues([P(x) for x in (0, 2, 2.01, 2.02, 6, 6.05)])
    assert [len(c) for c in cl] == [1, 3, 2]
