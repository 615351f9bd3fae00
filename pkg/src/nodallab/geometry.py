"""Model manifolds, quadrature and ball geometry.

Three models are supported: the flat torus R^n / (L_1 Z x ... x L_n Z), the
unit round 2-sphere, and closed triangle meshes embedded in R^3. Points are
arrays of shape (..., n) on the torus and (..., 3) otherwise. Balls are closed
(distance <= r) everywhere.

Mesh distance is the embedded chordal distance, which differs from the
intrinsic distance by O(h^2) in the edge length h.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError, InvalidPointError, MeshError, ResolutionError

TWO_PI = 2.0 * math.pi
SPHERE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ManifoldModel:
    kind: str
    n: int
    periods: tuple | None = None
    vertices: np.ndarray | None = field(default=None, repr=False)
    triangles: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("flat-torus", "round-sphere", "mesh-surface"):
            raise ConfigError(f"unknown manifold kind {self.kind!r}")
        if self.n < 2:
            raise ConfigError("dimension must be >= 2")
        if self.kind == "flat-torus":
            if self.periods is None or len(self.periods) != self.n:
                raise ConfigError("torus needs one period per dimension")
            if any(p <= 0 for p in self.periods):
                raise ConfigError("torus periods must be positive")
            if self.n > 3:
                raise ConfigError("torus dimension must be 2 or 3")
        elif self.n != 2:
            raise ConfigError(f"{self.kind} is two-dimensional")

    @property
    def dim_ambient(self) -> int:
        return self.n if self.kind == "flat-torus" else 3

    @cached_property
    def volume(self) -> float:
        if self.kind == "flat-torus":
            return float(np.prod(self.periods))
        if self.kind == "round-sphere":
            return 4.0 * math.pi
        return float(triangle_areas(self.vertices, self.triangles).sum())

    @property
    def diameter(self) -> float:
        if self.kind == "flat-torus":
            return 0.5 * math.sqrt(sum(p * p for p in self.periods))
        if self.kind == "round-sphere":
            return math.pi
        return 2.0 * float(np.max(np.linalg.norm(self.vertices, axis=1)))

    @property
    def injectivity_scale(self) -> float:
        """Radius below which geodesic balls are embedded discs (configurable cap
        for the existential "upper bound on r")."""
        if self.kind == "flat-torus":
            return 0.5 * min(self.periods)
        return math.pi

    # ---- embedding used by the ball kernels
    def embed(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if pts.shape[1] == 3:
            return pts
        out = np.zeros((pts.shape[0], 3))
        out[:, : pts.shape[1]] = pts
        return out

    @property
    def period3(self) -> np.ndarray:
        p = np.zeros(3)
        if self.kind == "flat-torus":
            p[: self.n] = self.periods
        return p

    def threshold2(self, r: float) -> float:
        """Squared embedded-distance threshold equivalent to distance <= r."""
        if self.kind == "round-sphere":
            if r >= math.pi:
                return math.inf
            return (2.0 * math.sin(0.5 * r)) ** 2
        return float(r) * float(r)

    def reach(self, r: float) -> float:
        t2 = self.threshold2(r)
        return 2.0 if math.isinf(t2) else math.sqrt(t2)

    def validate(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        if pts.shape[-1] != self.dim_ambient:
            raise InvalidPointError(
                f"expected points with {self.dim_ambient} coordinates, got {pts.shape[-1]}"
            )
        if self.kind == "round-sphere":
            norm = np.linalg.norm(pts, axis=-1)
            if np.any(np.abs(norm - 1.0) > SPHERE_TOL):
                raise InvalidPointError("sphere point is not a unit vector")
        if not np.all(np.isfinite(pts)):
            raise InvalidPointError("non-finite coordinates")
        return pts


def flat_torus(n: int = 2, periods=None) -> ManifoldModel:
    if periods is None:
        periods = (TWO_PI,) * n
    return ManifoldModel("flat-torus", n, tuple(float(p) for p in periods))


def round_sphere() -> ManifoldModel:
    return ManifoldModel("round-sphere", 2)


def mesh_surface(vertices, triangles) -> ManifoldModel:
    v = np.ascontiguousarray(vertices, dtype=np.float64)
    t = np.ascontiguousarray(triangles, dtype=np.int64)
    if v.ndim != 2 or v.shape[1] != 3 or t.ndim != 2 or t.shape[1] != 3:
        raise MeshError("mesh needs (V, 3) vertices and (T, 3) triangles")
    if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
        raise MeshError("triangle index out of range")
    return ManifoldModel("mesh-surface", 2, None, v, t)


def distance(m: ManifoldModel, p, q):
    """Geodesic distance (chordal on meshes); broadcasts over leading axes."""
    p = m.validate(p)
    q = m.validate(q)
    if m.kind == "flat-torus":
        L = np.asarray(m.periods)
        dx = np.abs(p - q) % L
        dx = np.minimum(dx, L - dx)
        return np.sqrt(np.sum(dx * dx, axis=-1))
    if m.kind == "round-sphere":
        # atan2 form: equal to arccos(<p,q>) but accurate near 0 and pi
        c = np.linalg.norm(np.cross(p, q), axis=-1)
        return np.arctan2(c, np.sum(p * q, axis=-1))
    return np.linalg.norm(p - q, axis=-1)


def triangle_areas(vertices, triangles) -> np.ndarray:
    v = vertices[triangles]
    return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)


def lumped_areas(vertices, triangles) -> np.ndarray:
    areas = triangle_areas(vertices, triangles)
    out = np.zeros(vertices.shape[0])
    np.add.at(out, triangles.ravel(), np.repeat(areas / 3.0, 3))
    return out


class Quadrature:
    """Points and positive weights realising integrals over a manifold.

    ``shape`` is the logical grid shape (torus: (res,)*n, sphere: (res, 2*res),
    mesh: (V,)); points are stored in C order of that grid.
    """

    def __init__(self, manifold, points, weights, resolution, shape, theta=None, phi=None):
        self.manifold = manifold
        self.points = points
        self.weights = weights
        self.resolution = resolution
        self.shape = shape
        self.theta = theta
        self.phi = phi
        self._grids = {}

    def __len__(self):
        return self.points.shape[0]

    @cached_property
    def embedded(self) -> np.ndarray:
        return self.manifold.embed(self.points)

    def grid(self, reach: float) -> kernels.CellGrid:
        key = round(float(reach), 12)
        g = self._grids.get(key)
        if g is None:
            e = self.embedded
            g = kernels.CellGrid(
                e, self.manifold.period3, e.min(axis=0) - 1e-9, e.max(axis=0) + 1e-9, reach
            )
            if len(self._grids) > 8:
                self._grids.clear()
            self._grids[key] = g
        return g

    @cached_property
    def edges(self) -> np.ndarray:
        """Neighbour pairs of the quadrature graph (grid axes or mesh edges)."""
        m = self.manifold
        idx = np.arange(len(self)).reshape(self.shape)
        if m.kind == "flat-torus":
            parts = [
                np.stack([idx.ravel(), np.roll(idx, -1, axis=a).ravel()], 1) for a in range(m.n)
            ]
            return np.concatenate(parts)
        if m.kind == "round-sphere":
            a = np.stack([idx[:-1].ravel(), idx[1:].ravel()], 1)
            b = np.stack([idx.ravel(), np.roll(idx, -1, axis=1).ravel()], 1)
            return np.concatenate([a, b])
        return mesh_edges(m.triangles)

    @cached_property
    def spacing(self) -> float:
        e = self.edges
        return float(np.max(distance(self.manifold, self.points[e[:, 0]], self.points[e[:, 1]])))

    def integrate(self, values) -> float:
        return kernels.csum(self.weights * values)


def mesh_edges(triangles) -> np.ndarray:
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def sphere_points(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def sphere_angles(pts):
    pts = np.asarray(pts, dtype=np.float64)
    theta = np.arctan2(np.hypot(pts[..., 0], pts[..., 1]), pts[..., 2])
    phi = np.mod(np.arctan2(pts[..., 1], pts[..., 0]), TWO_PI)
    return theta, phi


def build_quadrature(m: ManifoldModel, resolution: int) -> Quadrature:
    """Torus: uniform grid of resolution**n equal cells. Sphere: Gauss-Legendre
    in cos(theta) (resolution rows) times 2*resolution uniform longitudes, i.e.
    sin(theta) dtheta dphi weights exact for polynomials. Mesh: vertices with
    one third of the incident triangle areas (``resolution`` is ignored)."""
    if m.kind != "mesh-surface" and (int(resolution) != resolution or resolution < 8):
        raise ConfigError("quadrature resolution must be an integer >= 8")
    if m.kind == "flat-torus":
        res = int(resolution)
        axes = [np.arange(res) * (L / res) for L in m.periods]
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=1)
        w = np.full(pts.shape[0], float(np.prod([L / res for L in m.periods])))
        return Quadrature(m, pts, w, res, (res,) * m.n)
    if m.kind == "round-sphere":
        res = int(resolution)
        x, wx = np.polynomial.legendre.leggauss(res)
        x, wx = x[::-1], wx[::-1]
        theta = np.arccos(x)
        phi = np.arange(2 * res) * (math.pi / res)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        pts = sphere_points(th, ph).reshape(-1, 3)
        w = np.outer(wx, np.full(2 * res, math.pi / res)).ravel()
        return Quadrature(m, pts, w, res, (res, 2 * res), th.ravel(), ph.ravel())
    w = lumped_areas(m.vertices, m.triangles)
    return Quadrature(m, m.vertices.copy(), w, m.vertices.shape[0], (m.vertices.shape[0],))


# ---------------------------------------------------------------- balls


def ball_reduce(m: ManifoldModel, quad: Quadrature, centers, r: float, values):
    """Sums / maxima / counts of per-point ``values`` over closed balls B_r(c)."""
    centers = m.embed(centers)
    return kernels.ball_reduce(quad.grid(m.reach(r)), centers, m.threshold2(r), values)


def ball_counts(m: ManifoldModel, quad: Quadrature, centers, r: float):
    centers = m.embed(centers)
    return kernels.ball_counts(quad.grid(m.reach(r)), centers, m.threshold2(r))


def ball_mask(m: ManifoldModel, quad: Quadrature, centers, r: float) -> np.ndarray:
    if len(centers) == 0:
        return np.zeros(len(quad), dtype=bool)
    return ball_counts(m, quad, centers, r) > 0


def ball_volume(m: ManifoldModel, quad: Quadrature, p, r: float) -> float:
    if r <= 0:
        raise DomainError("radius must be positive")
    p = m.validate(p)
    sums, _, _ = ball_reduce(m, quad, p.reshape(1, -1), r, quad.weights)
    return float(sums[0, 0])


def bishop_gromov_ratio(m: ManifoldModel, quad: Quadrature, p, r: float) -> float:
    """Vol(B_{5r}(p)) / Vol(B_{r/2}(p))."""
    if not 0 < r <= m.diameter / 6.0:
        raise DomainError("need 0 < r <= diameter / 6")
    inner = ball_volume(m, quad, p, 0.5 * r)
    if inner <= 0:
        raise ResolutionError("inner ball contains no quadrature point")
    return ball_volume(m, quad, p, 5.0 * r) / inner


def laplacian_of_distance_defect(m: ManifoldModel, p, s: float) -> float:
    """|Delta d + (1 - n)/s| for the distance d to p, in closed form.

    Zero on the flat torus, (n-1)|cot s - 1/s| on the unit sphere. Meshes are
    treated as the unit sphere they approximate.
    """
    if m.kind == "flat-torus":
        if not 0 < s < m.injectivity_scale:
            raise DomainError("s must lie in (0, half the shortest period)")
        return 0.0
    if not 0 < s < math.pi:
        raise DomainError("s must lie in (0, pi)")
    return (m.n - 1) * abs(math.cos(s) / math.sin(s) - 1.0 / s)


# ---------------------------------------------------------------- meshes


def icosphere(subdiv: int):
    """Unit icosphere: icosahedron with ``subdiv`` rounds of 4-to-1 splits."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
         [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
         [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]],
        dtype=np.float64,
    )
    f = np.array(
        [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]],
        dtype=np.int64,
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdiv):
        verts = list(v)
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v = np.array(verts)
        f = np.array(nf, dtype=np.int64)
    return v, f


def read_off(path):
    """ASCII OFF reader (triangles only)."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise MeshError("missing OFF header")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise MeshError("only triangular faces are supported")
            faces.append([int(x) for x in tokens[pos + 1 : pos + 4]])
            pos += 4
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed OFF file: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


def write_off(path, vertices, triangles):
    lines = ["OFF", f"{len(vertices)} {len(triangles)} 0"]
    lines += [" ".join(repr(float(x)) for x in v) for v in vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles]
    Path(path).write_text("\n".join(lines) + "\n")
