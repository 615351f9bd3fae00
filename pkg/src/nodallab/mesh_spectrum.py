"""Cotangent Laplacian with lumped mass, and a Chebyshev-filtered block
subspace iteration for its lowest eigenpairs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigenmodes import SampledField, normalize_l2
from .errors import ConfigError, ConvergenceError, DomainError, MeshQualityError, NotClosedError
from .geometry import ManifoldModel, Quadrature, lumped_areas, triangle_areas


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    stiffness: sp.csr_matrix
    mass: np.ndarray

    @property
    def size(self) -> int:
        return self.mass.shape[0]


@dataclass(frozen=True, eq=False)
class EigenPair:
    eigenvalue: float
    vector: np.ndarray
    residual: float


def assemble(mesh) -> DiscreteOperator:
    """Stiffness S_ij = -(cot a_ij + cot b_ij)/2 with zero row sums, and
    one-third-area lumped mass. ``mesh`` is a mesh ManifoldModel or a
    (vertices, triangles) pair."""
    if isinstance(mesh, ManifoldModel):
        v, t = mesh.vertices, mesh.triangles
    else:
        v, t = mesh
        v = np.asarray(v, dtype=np.float64)
        t = np.asarray(t, dtype=np.int64)
    areas = triangle_areas(v, t)
    if np.any(areas <= 1e-14):
        raise MeshQualityError(f"{int(np.sum(areas <= 1e-14))} degenerate triangles")
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    if np.any(counts != 2):
        raise NotClosedError("every edge must be shared by exactly two triangles")

    rows, cols, vals = [], [], []
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        # angle at vertex c is opposite edge (a, b)
        e1 = v[t[:, a]] - v[t[:, c]]
        e2 = v[t[:, b]] - v[t[:, c]]
        cot = np.einsum("ij,ij->i", e1, e2) / np.linalg.norm(np.cross(e1, e2), axis=1)
        i = np.minimum(t[:, a], t[:, b])
        j = np.maximum(t[:, a], t[:, b])
        rows.append(i)
        cols.append(j)
        vals.append(-0.5 * cot)
    n = v.shape[0]
    upper = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    off = (upper + upper.T).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    stiff = (off + sp.diags(diag)).tocsr()
    stiff.sort_indices()
    return DiscreteOperator(stiff, lumped_areas(v, t))


def _chebyshev_filter(A, X, degree, lo, hi):
    """T_degree of A mapped so that [lo, hi] -> [-1, 1]; amplifies the part of X
    below ``lo``."""
    e = 0.5 * (hi - lo)
    c = 0.5 * (hi + lo)
    Y = (A @ X - c * X) / e
    Xp = X
    for _ in range(2, degree + 1):
        Yn = 2.0 * (A @ Y - c * Y) / e - Xp
        Xp, Y = Y, Yn
    return Y


def lowest_eigenpairs(
    op: DiscreteOperator, count: int, tol: float = 1e-8, seed: int = 0, max_sweeps: int = 200,
    degree: int = 40,
) -> list[EigenPair]:
    """Lowest ``count`` pairs of S v = lambda M v.

    The lumped mass turns the problem into A x = lambda x with
    A = M^-1/2 S M^-1/2. A seeded block (wider than ``count`` so clusters of
    multiplicity 2l+1 are resolved) is swept with a Chebyshev filter that damps
    [largest Ritz value, Gershgorin bound], re-orthonormalised and
    Rayleigh-Ritz projected every sweep. Residuals are
    ||(S - lambda M) v|| / ||M v||.
    """
    n = op.size
    if not 1 <= count < n / 4:
        raise ConfigError("need 1 <= count < size / 4")
    if tol < 1e-10:
        raise ConfigError("tol must be >= 1e-10")
    rng = np.random.default_rng(seed)
    dh = 1.0 / np.sqrt(op.mass)
    A = (sp.diags(dh) @ op.stiffness @ sp.diags(dh)).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    sq = np.sqrt(op.mass)
    upper = float(np.max(np.asarray(abs(A).sum(axis=1)).ravel()))

    p = min(count + max(8, count // 3), n)
    X, _ = np.linalg.qr(rng.standard_normal((n, p)))
    best = np.inf
    for _ in range(max_sweeps):
        Hs = X.T @ (A @ X)
        theta, Ys = np.linalg.eigh(0.5 * (Hs + Hs.T))
        X = X @ Ys
        R = A @ X[:, :count] - X[:, :count] * theta[:count]
        res = np.linalg.norm(sq[:, None] * R, axis=0) / np.linalg.norm(
            sq[:, None] * X[:, :count], axis=0
        )
        best = min(best, float(res.max()))
        if res.max() <= tol:
            break
        X = _chebyshev_filter(A, X, degree, float(theta[-1]), upper)
        X, _ = np.linalg.qr(X)
    else:
        raise ConvergenceError("filtered subspace iteration did not converge", best)

    pairs = []
    for j in range(count):
        vec = dh * X[:, j]
        lead = np.flatnonzero(np.abs(vec) > 1e-12 * np.abs(vec).max())[0]
        if vec[lead] < 0:
            vec = -vec
        pairs.append(EigenPair(float(theta[j]), vec, float(res[j])))
    return pairs


def cluster_eigenvalues(pairs, rel_gap: float = 0.25):
    """Group sorted eigenvalues into clusters separated by relative gaps."""
    out = [[pairs[0]]]
    for p in pairs[1:]:
        prev = out[-1][-1].eigenvalue
        if p.eigenvalue - prev > rel_gap * max(abs(prev), 1.0):
            out.append([p])
        else:
            out[-1].append(p)
    return out


def to_field(pair: EigenPair, mesh: ManifoldModel, quad: Quadrature) -> SampledField:
    if pair.residual > 1e-6:
        raise DomainError("eigenpair residual above 1e-6")
    if pair.eigenvalue < 1e-6:
        raise DomainError("constant mode excluded (zero eigenvalue)")
    raw = SampledField(mesh, quad, np.array(pair.vector, dtype=np.float64), pair.eigenvalue,
                       None, f"mesh lambda={pair.eigenvalue:.6g}")
    return normalize_l2(raw)
