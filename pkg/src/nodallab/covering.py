"""Wavelength-scale maximal packings, double-ball multiplicities and the
zero-spacing constant."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .eigenmodes import SampledField
from .errors import DomainError, NoNodalSetError, ResolutionError
from .geometry import ManifoldModel, Quadrature, ball_counts


@dataclass(eq=False)
class BallCover:
    manifold: ManifoldModel
    radius: float
    center_index: np.ndarray
    centers: np.ndarray
    max_multiplicity: int | None = None
    histogram: np.ndarray | None = None

    def __len__(self):
        return len(self.center_index)


def build_cover(m: ManifoldModel, quad: Quadrature, r: float) -> BallCover:
    """Greedy maximal packing over quadrature points in index order: a point
    becomes a centre iff it is at distance >= r from all earlier centres. The
    balls B_r(centre) then cover every quadrature point."""
    if not 0 < r < 2.0 * m.diameter:
        raise DomainError("need 0 < r < 2 * diameter")
    if quad.spacing >= r / 4.0:
        raise ResolutionError(
            f"grid spacing {quad.spacing:.4g} >= r/4 = {r / 4:.4g}; covering certificate vacuous"
        )
    idx = kernels.greedy_pack(quad.grid(m.reach(r)), m.threshold2(r))
    return BallCover(m, float(r), idx, quad.points[idx])


def overlap_multiplicity(cover: BallCover, quad: Quadrature):
    """Max over quadrature points of the number of double balls 2B_i containing
    the point, and the histogram (entry m = points in exactly m double balls)."""
    counts = ball_counts(cover.manifold, quad, cover.centers, 2.0 * cover.radius)
    hist = np.bincount(counts)
    cover.max_multiplicity = int(counts.max())
    cover.histogram = hist
    return cover.max_multiplicity, hist


def covering_counts(cover: BallCover, quad: Quadrature) -> np.ndarray:
    """Number of balls B_i containing each quadrature point (>= 1 on a cover)."""
    return ball_counts(cover.manifold, quad, cover.centers, cover.radius)


def wavelength_radius(a: float, lam: float) -> float:
    if lam < 1:
        raise DomainError("eigenvalues below 1 are excluded")
    if a <= 0:
        raise DomainError("a must be positive")
    return a / math.sqrt(lam)


# ---------------------------------------------------------------- zero set


@dataclass(eq=False)
class EmpiricalZeros:
    """Linear-interpolated zeros on sign-change quadrature edges plus exact-zero
    quadrature points (``edge == -1``)."""

    points: np.ndarray
    edge: np.ndarray
    t: np.ndarray


def _lerp(m: ManifoldModel, p0, p1, t):
    t = np.asarray(t)[..., None]
    if m.kind == "flat-torus":
        L = np.asarray(m.periods)
        d = p1 - p0
        d = d - L * np.round(d / L)
        return np.mod(p0 + t * d, L)
    q = p0 + t * (p1 - p0)
    if m.kind == "round-sphere":
        q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return q


def empirical_zeros(f: SampledField) -> EmpiricalZeros:
    u = f.values
    e = f.quad.edges
    u0, u1 = u[e[:, 0]], u[e[:, 1]]
    change = ((u0 > 0) & (u1 < 0)) | ((u0 < 0) & (u1 > 0))
    ec = e[change]
    t = u0[change] / (u0[change] - u1[change])
    pts = _lerp(f.manifold, f.quad.points[ec[:, 0]], f.quad.points[ec[:, 1]], t)
    exact = np.flatnonzero(u == 0.0)
    pts = np.concatenate([pts, f.quad.points[exact]])
    edge = np.concatenate([np.flatnonzero(change), np.full(exact.size, -1)])
    tt = np.concatenate([t, np.zeros(exact.size)])
    if pts.shape[0] == 0:
        raise NoNodalSetError("field has no sign change on the quadrature graph")
    return EmpiricalZeros(pts, edge, tt)


def _tree(m: ManifoldModel, pts):
    if m.kind == "flat-torus":
        L = np.asarray(m.periods)
        x = np.mod(pts, L)
        x = np.where(x >= L, x - L, x)
        return cKDTree(x, boxsize=L)
    return cKDTree(pts)


def _chord_to_dist(m: ManifoldModel, d):
    if m.kind == "round-sphere":
        return 2.0 * np.arcsin(np.minimum(d * 0.5, 1.0))
    return d


def zero_spacing_scale(f: SampledField) -> float:
    """Smallest a with a sign change within a / (3 sqrt(lambda)) of every
    quadrature point: 3 sqrt(lambda) * max_x dist(x, empirical zero set)."""
    if f.eigenvalue < 1:
        raise DomainError("eigenvalues below 1 are excluded")
    z = empirical_zeros(f)
    m = f.manifold
    qpts = f.quad.points
    if m.kind == "flat-torus":
        L = np.asarray(m.periods)
        qpts = np.where(qpts >= L, qpts - L, qpts)
    d, _ = _tree(m, z.points).query(qpts, k=1)
    far = float(np.max(_chord_to_dist(m, d)))
    return 3.0 * math.sqrt(f.eigenvalue) * far


def refine_zeros(f: SampledField, z: EmpiricalZeros, which, iters: int = 60):
    """Zeros of the field on the selected sign-change edges: bisection on the
    analytic evaluator, or the exact linear zero for piecewise-linear (mesh)
    fields."""
    which = np.asarray(which, dtype=np.int64)
    edge = z.edge[which]
    out = z.points[which].copy()
    live = edge >= 0
    if f.evaluator is None or not live.any():
        return out
    e = f.quad.edges[edge[live]]
    p0 = f.quad.points[e[:, 0]]
    p1 = f.quad.points[e[:, 1]]
    m = f.manifold
    lo = np.zeros(len(e))
    hi = np.ones(len(e))
    s0 = np.sign(f.values[e[:, 0]])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        v = f.evaluate(_lerp(m, p0, p1, mid))
        same = np.sign(v) == s0
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    tz = 0.5 * (lo + hi)
    out[live] = _lerp(m, p0, p1, tz)
    return out


def nearest_zeros(f: SampledField, centers, z: EmpiricalZeros | None = None):
    """For each centre, the nearest empirical zero refined onto the true zero
    set, and its distance from the centre."""
    from .geometry import distance

    if z is None:
        z = empirical_zeros(f)
    m = f.manifold
    c = np.asarray(centers, dtype=np.float64)
    if m.kind == "flat-torus":
        L = np.asarray(m.periods)
        c = np.where(c >= L, c - L, c)
    _, j = _tree(m, z.points).query(c, k=1)
    q = refine_zeros(f, z, j)
    if m.kind == "mesh-surface":
        dist = np.linalg.norm(q - c, axis=1)
    else:
        dist = distance(m, c, q)
    return q, dist
