"""The numba kernels and the pure-numpy fallback give the same answers."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from nodallab import kernels

SCRIPT = r"""
import json, math
import numpy as np
from nodallab import covering as cv, eigenmodes as em, geometry as geo, nodal as nd, kernels
out = {"backend": kernels.BACKEND}
m = geo.flat_torus(2); q = geo.build_quadrature(m, 128)
f = em.torus_mode(m, q, (3, 2))
c = cv.build_cover(m, q, 0.5)
out["centers"] = c.center_index.tolist()
out["mult"] = cv.overlap_multiplicity(c, q)[1].tolist()
s, mx, n = geo.ball_reduce(m, q, c.centers, 0.7, np.stack([q.weights * f.values, f.values], 1))
out["reduce"] = [s.tolist(), mx.tolist(), n.tolist()]
est = nd.extract_nodal(f, 128)
out["nodal"] = [est.total, nd.nodal_in_balls(est, c.centers, 0.5).tolist()]
s2 = geo.round_sphere(); qs = geo.build_quadrature(s2, 64)
g = em.sphere_harmonic(s2, qs, 5, "beam")
cs = cv.build_cover(s2, qs, 0.4)
es = nd.extract_nodal(g, 128)
out["sphere"] = [cs.center_index.tolist(), nd.nodal_in_balls(es, cs.centers, 0.4).tolist()]
m3 = geo.flat_torus(3)
f3 = em.field_from_evaluator(m3, geo.build_quadrature(m3, 64),
    lambda p: np.sin(p[:, 0]) + np.cos(2 * p[:, 1]) * np.sin(p[:, 2]), 1.0)
e3 = nd.extract_nodal(f3, 64)
out["t3"] = [e3.total, nd.nodal_in_balls(e3, np.array([[1.0, 2.0, 3.0], [0.1, 6.2, 0.0]]), 1.2).tolist()]
v, t = geo.icosphere(2)
out["mesh"] = kernels.march_tris(v, t, v[:, 0] - 0.3 * v[:, 2]).tolist()
print(json.dumps(out))
"""


def run(pure):
    env = dict(os.environ)
    env["NODALLAB_PURE_NUMPY"] = "1" if pure else "0"
    res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(res.stdout)


@pytest.fixture(scope="module")
def both():
    return run(False), run(True)


def test_flag_selects_backend(both):
    fast, pure = both
    assert fast["backend"] == "numba"
    assert pure["backend"] == "numpy"


def test_packings_identical(both):
    fast, pure = both
    assert fast["centers"] == pure["centers"]
    assert fast["mult"] == pure["mult"]
    assert fast["sphere"][0] == pure["sphere"][0]


@pytest.mark.parametrize("key", ["reduce", "nodal", "sphere", "t3", "mesh"])
def test_results_agree(both, key):
    fast, pure = both
    a, b = fast[key], pure[key]
    if key == "mesh":
        np.testing.assert_allclose(np.sort(np.array(a), axis=0), np.sort(np.array(b), axis=0),
                                   atol=1e-12)
        return
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x, float), np.asarray(y, float), rtol=1e-9,
                                   atol=1e-12)


def test_csum_is_compensated():
    x = np.array([1.0, 1e100, 1.0, -1e100] * 1000)
    assert kernels.csum(x) == 2000.0
