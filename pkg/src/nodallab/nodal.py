"""Zero-level-set extraction, (n-1)-measure per ball, sign volumes and masses."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .eigenmodes import SampledField
from .errors import DomainError
from .geometry import ManifoldModel, ball_reduce, sphere_points
from .lpnorms import ScalingFit, loglog_fit


@dataclass(eq=False)
class NodalEstimate:
    """Piecewise-linear zero set. ``pieces`` is (P, 2, D) segments when n = 2 or
    (P, 3, 3) triangles when n = 3. Torus pieces live in the covering chart
    (unwrapped within a piece); sphere and mesh pieces are chords in R^3."""

    manifold: ManifoldModel = field(repr=False)
    n: int
    pieces: np.ndarray = field(repr=False)
    measures: np.ndarray = field(repr=False)
    total: float
    resolution: int
    _grid: object = field(default=None, repr=False, compare=False)

    @property
    def midpoints(self):
        return self.pieces.mean(axis=1)

    def __len__(self):
        return self.pieces.shape[0]


def _segment_lengths(seg):
    return np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)


def _triangle_areas(tri):
    return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)


def _measure(pieces, n):
    return _segment_lengths(pieces) if n == 2 else _triangle_areas(pieces)


def extract_nodal(f: SampledField, resolution: int | None = None) -> NodalEstimate:
    """Marching triangles (n = 2; split grid squares or mesh faces) or marching
    Kuhn tetrahedra (3-torus) on the sign classes u > 0 / u <= 0, with linear
    interpolation along sign-change edges."""
    m = f.manifold
    if m.kind == "mesh-surface":
        pieces = kernels.march_tris(m.vertices, m.triangles, f.values)
        res = m.vertices.shape[0]
    else:
        if f.evaluator is None:
            raise DomainError("analytic extraction needs an evaluator")
        if resolution is None or resolution < 64:
            raise DomainError("extraction resolution must be >= 64")
        res = int(resolution)
        if m.kind == "flat-torus":
            h = np.array(m.periods) / res
            axes = [np.arange(res) * hi for hi in h]
            grid = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([g.ravel() for g in grid], axis=1)
            vals = f.evaluate(pts).reshape((res,) * m.n)
            if m.n == 2:
                pieces = kernels.march_grid2(vals, (True, True)) * h
            else:
                pieces = kernels.march_grid3(vals) * h
        else:
            th = np.arange(res + 1) * (math.pi / res)
            ph = np.arange(2 * res) * (math.pi / res)
            T, P = np.meshgrid(th, ph, indexing="ij")
            vals = f.evaluate(sphere_points(T, P).reshape(-1, 3)).reshape(T.shape)
            seg = kernels.march_grid2(vals, (False, True)) * (math.pi / res)
            pieces = sphere_points(seg[..., 0], seg[..., 1])
    measures = _measure(pieces, m.n)
    if pieces.shape[0] == 0:
        warnings.warn("no sign change: empty nodal estimate", RuntimeWarning, stacklevel=2)
    return NodalEstimate(m, m.n, pieces, measures, kernels.csum(measures), res)


def _embedded_pieces(nodal: NodalEstimate):
    pcs = nodal.pieces
    if pcs.shape[-1] == 3:
        return pcs
    out = np.zeros(pcs.shape[:-1] + (3,))
    out[..., : pcs.shape[-1]] = pcs
    return out


def piece_grid(nodal: NodalEstimate, r: float) -> kernels.PieceGrid:
    """Cell list over the pieces for balls of radius up to ``r``; the last one
    built is cached on the estimate and reused for radii in [r/2, r]."""
    m = nodal.manifold
    need = m.reach(r)
    pg = nodal._grid
    if pg is None or not need <= pg.reach <= 2.0 * need:
        pg = kernels.PieceGrid(_embedded_pieces(nodal), nodal.measures, m.period3, need)
        nodal._grid = pg
    return pg


def nodal_in_balls(nodal: NodalEstimate, centers, r: float):
    """(n-1)-measure of the zero set inside each closed ball B_r(c). Pieces with
    every vertex inside count fully; others are subdivided once and children
    kept by midpoint membership."""
    m = nodal.manifold
    centers = m.embed(np.asarray(centers, dtype=np.float64))
    if len(nodal) == 0:
        return np.zeros(centers.shape[0])
    return kernels.clip_measure(
        piece_grid(nodal, r), centers, m.threshold2(r), unit=m.kind == "round-sphere"
    )


def nodal_in_ball(nodal: NodalEstimate, center, r: float) -> float:
    return float(nodal_in_balls(nodal, center, r)[0])


# ---------------------------------------------------------------- signs


def ball_stats(f: SampledField, centers, r: float) -> dict:
    """Per-ball quadrature statistics over closed balls B_r(c)."""
    u = f.values
    w = f.quad.weights
    cols = np.stack(
        [
            w,
            np.where(u > 0, w, 0.0),
            np.where(u < 0, w, 0.0),
            w * u,
            w * np.maximum(u, 0.0),
            w * np.maximum(-u, 0.0),
            w * np.abs(u),
            w * u * u,
            u * u,
            np.abs(u),
        ],
        axis=1,
    )
    sums, maxs, counts = ball_reduce(f.manifold, f.quad, np.atleast_2d(centers), r, cols)
    return {
        "vol": sums[:, 0],
        "vol_plus": sums[:, 1],
        "vol_minus": sums[:, 2],
        "int_u": sums[:, 3],
        "int_plus": sums[:, 4],
        "int_minus": sums[:, 5],
        "int_abs": sums[:, 6],
        "int_u2": sums[:, 7],
        "sup_u2": maxs[:, 8],
        "sup_abs": maxs[:, 9],
        "count": counts,
    }


def sign_volumes(f: SampledField, center, r: float):
    s = ball_stats(f, center, r)
    return float(s["vol_plus"][0]), float(s["vol_minus"][0])


def sign_masses(f: SampledField, center, r: float):
    s = ball_stats(f, center, r)
    return float(s["int_plus"][0]), float(s["int_minus"][0]), float(s["int_abs"][0])


def isoperimetric_link(nodal: NodalEstimate, f: SampledField, center, r: float):
    """(nodal measure in B_r(c), min(Vol B+, Vol B-)^((n-1)/n)). A zero right
    side flags a one-signed ball, for which the comparison is skipped."""
    lhs = nodal_in_ball(nodal, center, r)
    vp, vm = sign_volumes(f, center, r)
    n = f.manifold.n
    return lhs, min(vp, vm) ** ((n - 1) / n)


def total_vs_theorem(samples, n: int):
    """Fit of total nodal measure against lambda, and the constant
    c = min over the sweep of total / lambda^((3-n)/4)."""
    samples = list(samples)
    if len(samples) < 5:
        from .errors import InsufficientSweepError

        raise InsufficientSweepError("need at least 5 sweep values")
    fit: ScalingFit = loglog_fit(samples)
    c = min(t / lam ** ((3.0 - n) / 4.0) for lam, t in samples)
    return fit, c
