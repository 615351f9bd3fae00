"""Hot loops: fixed-radius ball queries over cell lists, greedy packing and
marching simplices.

Each public function has a numba implementation and a pure-numpy twin. The
numba path is used unless ``NODALLAB_PURE_NUMPY=1`` is set in the environment
(or numba fails to import). Both paths visit points in the same order and use
the same distance arithmetic, so packings and level-set pieces agree exactly;
ball sums agree to rounding.
"""
from __future__ import annotations

import math
import os

import numpy as np

_FLAG = os.environ.get("NODALLAB_PURE_NUMPY", "").strip().lower()
USE_NUMBA = _FLAG in ("", "0", "false", "no")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


BACKEND = "numba" if USE_NUMBA else "numpy"

# Kuhn split of the unit cube into 6 tetrahedra sharing the main diagonal.
# Neighbouring cubes induce the same split on shared faces.
_CUBE = np.array(
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1]],
    dtype=np.int64,
)
_KUHN = np.array(
    [[0, 1, 3, 7], [0, 1, 5, 7], [0, 2, 3, 7], [0, 2, 6, 7], [0, 4, 5, 7], [0, 4, 6, 7]],
    dtype=np.int64,
)


class CellGrid:
    """Uniform cell list over points in a (possibly periodic) box.

    ``coords`` is (N, 3); unused axes are zero with ``period == 0`` and a
    degenerate extent. Cells are about ``reach / sub`` wide and a query scans
    the cells within ``span`` of its own cell on each axis, skipping cells
    whose box lies farther than the query threshold. ``sorted`` holds the
    coordinates in cell order so scans read memory contiguously.
    """

    def __init__(self, coords, period, lo, hi, reach, sub: int = 2):
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.period = np.asarray(period, dtype=np.float64)
        n = self.coords.shape[0]
        lo = np.where(self.period > 0, 0.0, np.asarray(lo, dtype=np.float64))
        ext = np.where(self.period > 0, self.period, np.asarray(hi, dtype=np.float64) - lo)
        ext = np.maximum(ext, 1e-300)
        active = max(1, int(np.sum(ext > 1e-12)))
        cap = max(1, int(math.ceil((4.0 * max(n, 1)) ** (1.0 / active))))
        m = np.floor(ext * sub / max(reach, 1e-300)).astype(np.int64)
        m = np.clip(m, 1, cap)
        self.m = m
        self.lo = lo
        self.cs = ext / m
        with np.errstate(over="ignore"):
            ratio = np.minimum(reach / self.cs, m)
        self.span = np.ceil(ratio - 1e-12).astype(np.int64).clip(1, None)
        cell = _cell_ids(self.coords, self.lo, self.cs, self.m, self.period)
        self.order = np.argsort(cell, kind="stable").astype(np.int64)
        self.sorted = np.ascontiguousarray(self.coords[self.order])
        self.start = np.searchsorted(cell[self.order], np.arange(int(np.prod(m)) + 1)).astype(
            np.int64
        )
        self.reach = reach
        self.width = int(max(min(int(m[a]), 2 * int(self.span[a]) + 1) for a in range(3)))

    def args(self):
        return (self.sorted, self.order, self.start, self.m, self.lo, self.cs, self.period,
                self.span, self.width)

    def candidates(self, center, thr2=math.inf):
        """Indices of points in the cells that can hold points within
        sqrt(thr2) of ``center`` (in scan order)."""
        return self.order[self.candidate_slots(center, thr2)]

    def candidate_slots(self, center, thr2=math.inf):
        """Like ``candidates`` but as positions in cell order."""
        axes = [_axis_cells(center[a], self.lo[a], self.cs[a], self.m[a], self.period[a],
                            self.span[a]) for a in range(3)]
        parts = []
        for c0, g0 in zip(*axes[0]):
            for c1, g1 in zip(*axes[1]):
                if g0 + g1 > thr2:
                    continue
                for c2, g2 in zip(*axes[2]):
                    if g0 + g1 + g2 > thr2:
                        continue
                    cid = (c0 * self.m[1] + c1) * self.m[2] + c2
                    parts.append(np.arange(self.start[cid], self.start[cid + 1]))
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)


def _cell_ids(coords, lo, cs, m, period):
    x = coords.copy()
    for a in range(3):
        if period[a] > 0:
            x[:, a] = np.mod(x[:, a], period[a])
    ijk = np.floor((x - lo) / cs).astype(np.int64)
    ijk = np.clip(ijk, 0, m - 1)
    return (ijk[:, 0] * m[1] + ijk[:, 1]) * m[2] + ijk[:, 2]


def _gap(x, left, cs):
    g = max(0.0, left - x, x - left - cs)
    # shave a hair so rounding in cell assignment never prunes a boundary point
    g = max(0.0, g - 1e-9 * cs)
    return g * g


def _axis_cells(x, lo, cs, m, period, span):
    """(cell indices, squared gaps from x to each cell) along one axis."""
    m = int(m)
    span = int(span)
    if period > 0:
        x = x % period
    c = min(max(int(math.floor((x - lo) / cs)), 0), m - 1)
    cells, gaps = [], []
    if period > 0 and 2 * span + 1 >= m:
        for i in range(m):
            left = lo + i * cs
            g = min(_gap(x, left, cs), _gap(x + period, left, cs), _gap(x - period, left, cs))
            cells.append(i)
            gaps.append(g)
    elif period > 0:
        for o in range(-span, span + 1):
            cells.append((c + o) % m)
            gaps.append(_gap(x, lo + (c + o) * cs, cs))
    else:
        for i in range(max(c - span, 0), min(c + span, m - 1) + 1):
            cells.append(i)
            gaps.append(_gap(x, lo + i * cs, cs))
    return cells, gaps


def _sqdist_np(pts, center, period):
    d2 = None
    for a in range(3):
        dx = np.abs(pts[:, a] - center[a])
        if period[a] > 0:
            dx = np.where(dx > 0.5 * period[a], period[a] - dx, dx)
        d2 = dx * dx if d2 is None else d2 + dx * dx
    return d2


def _wrap_centers(centers, period):
    c = np.array(centers, dtype=np.float64, copy=True)
    for a in range(3):
        if period[a] > 0:
            c[:, a] = np.mod(c[:, a], period[a])
    return c


# ---------------------------------------------------------------- numba side


@njit(cache=True)
def _nb_gap(x, left, cs):
    g = max(0.0, left - x, x - left - cs)
    g = max(0.0, g - 1e-9 * cs)
    return g * g


@njit(cache=True)
def _nb_axis_cells(x, lo, cs, m, period, span, out, gaps):
    if period > 0:
        x = x % period
    c = int(np.floor((x - lo) / cs))
    if c < 0:
        c = 0
    if c > m - 1:
        c = m - 1
    k = 0
    if period > 0 and 2 * span + 1 >= m:
        for i in range(m):
            left = lo + i * cs
            g = min(_nb_gap(x, left, cs), _nb_gap(x + period, left, cs),
                    _nb_gap(x - period, left, cs))
            out[k] = i
            gaps[k] = g
            k += 1
    elif period > 0:
        for o in range(-span, span + 1):
            out[k] = (c + o) % m
            gaps[k] = _nb_gap(x, lo + (c + o) * cs, cs)
            k += 1
    else:
        for i in range(max(c - span, 0), min(c + span, m - 1) + 1):
            out[k] = i
            gaps[k] = _nb_gap(x, lo + i * cs, cs)
            k += 1
    return k


@njit(cache=True)
def _nb_cells(cx, lo, cs, m, period, span, cells, gaps, ncell):
    for a in range(3):
        ncell[a] = _nb_axis_cells(cx[a], lo[a], cs[a], m[a], period[a], span[a], cells[a],
                                  gaps[a])


@njit(cache=True)
def _nb_sqdist(coords, j, cx, period):
    d2 = 0.0
    for a in range(3):
        dx = abs(coords[j, a] - cx[a])
        if period[a] > 0 and dx > 0.5 * period[a]:
            dx = period[a] - dx
        d2 += dx * dx
    return d2


@njit(cache=True)
def _nb_ball_reduce(srt, order, start, m, lo, cs, period, span, width, centers, thr2, values):
    nc = centers.shape[0]
    nk = values.shape[1]
    sums = np.zeros((nc, nk))
    maxs = np.full((nc, nk), -np.inf)
    counts = np.zeros(nc, dtype=np.int64)
    comp = np.zeros(nk)
    cells = np.empty((3, width), dtype=np.int64)
    gaps = np.empty((3, width))
    ncell = np.empty(3, dtype=np.int64)
    for c in range(nc):
        cx = centers[c]
        _nb_cells(cx, lo, cs, m, period, span, cells, gaps, ncell)
        comp[:] = 0.0
        for i0 in range(ncell[0]):
            for i1 in range(ncell[1]):
                g01 = gaps[0, i0] + gaps[1, i1]
                if g01 > thr2:
                    continue
                for i2 in range(ncell[2]):
                    if g01 + gaps[2, i2] > thr2:
                        continue
                    cid = (cells[0, i0] * m[1] + cells[1, i1]) * m[2] + cells[2, i2]
                    for t in range(start[cid], start[cid + 1]):
                        if _nb_sqdist(srt, t, cx, period) <= thr2:
                            j = order[t]
                            counts[c] += 1
                            for k in range(nk):
                                v = values[j, k]
                                s = sums[c, k]
                                tot = s + v
                                if abs(s) >= abs(v):
                                    comp[k] += (s - tot) + v
                                else:
                                    comp[k] += (v - tot) + s
                                sums[c, k] = tot
                                if v > maxs[c, k]:
                                    maxs[c, k] = v
        for k in range(nk):
            sums[c, k] += comp[k]
    return sums, maxs, counts


@njit(cache=True)
def _nb_ball_counts(srt, order, start, m, lo, cs, period, span, width, centers, thr2):
    counts = np.zeros(srt.shape[0], dtype=np.int64)
    cells = np.empty((3, width), dtype=np.int64)
    gaps = np.empty((3, width))
    ncell = np.empty(3, dtype=np.int64)
    for c in range(centers.shape[0]):
        cx = centers[c]
        _nb_cells(cx, lo, cs, m, period, span, cells, gaps, ncell)
        for i0 in range(ncell[0]):
            for i1 in range(ncell[1]):
                g01 = gaps[0, i0] + gaps[1, i1]
                if g01 > thr2:
                    continue
                for i2 in range(ncell[2]):
                    if g01 + gaps[2, i2] > thr2:
                        continue
                    cid = (cells[0, i0] * m[1] + cells[1, i1]) * m[2] + cells[2, i2]
                    for t in range(start[cid], start[cid + 1]):
                        if _nb_sqdist(srt, t, cx, period) <= thr2:
                            counts[order[t]] += 1
    return counts


@njit(cache=True)
def _nb_greedy_pack(coords, m, lo, cs, period, span, width, thr2):
    n = coords.shape[0]
    head = np.full(m[0] * m[1] * m[2], -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    chosen = np.empty(n, dtype=np.int64)
    nchosen = 0
    cells = np.empty((3, width), dtype=np.int64)
    gaps = np.empty((3, width))
    ncell = np.empty(3, dtype=np.int64)
    own = np.empty(3, dtype=np.int64)
    for i in range(n):
        cx = coords[i]
        _nb_cells(cx, lo, cs, m, period, span, cells, gaps, ncell)
        for a in range(3):
            x = cx[a] % period[a] if period[a] > 0 else cx[a]
            c = int(np.floor((x - lo[a]) / cs[a]))
            own[a] = min(max(c, 0), m[a] - 1)
        ok = True
        for i0 in range(ncell[0]):
            for i1 in range(ncell[1]):
                g01 = gaps[0, i0] + gaps[1, i1]
                if g01 >= thr2:
                    continue
                for i2 in range(ncell[2]):
                    if g01 + gaps[2, i2] >= thr2:
                        continue
                    cid = (cells[0, i0] * m[1] + cells[1, i1]) * m[2] + cells[2, i2]
                    j = head[cid]
                    while j >= 0:
                        if _nb_sqdist(coords, j, cx, period) < thr2:
                            ok = False
                            break
                        j = nxt[j]
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            chosen[nchosen] = i
            nchosen += 1
            cid = (own[0] * m[1] + own[1]) * m[2] + own[2]
            nxt[i] = head[cid]
            head[cid] = i
    return chosen[:nchosen]


@njit(cache=True)
def _nb_tri_cross(v0, v1, v2, p0, p1, p2, out, k, fill):
    # one segment per triangle whose vertex classes (v > 0) are mixed
    c0 = v0 > 0
    c1 = v1 > 0
    c2 = v2 > 0
    if c0 == c1 and c1 == c2:
        return k
    if c1 == c2:
        iv, a, b, pa, pb, pi = v0, v1, v2, p1, p2, p0
    elif c0 == c2:
        iv, a, b, pa, pb, pi = v1, v2, v0, p2, p0, p1
    else:
        iv, a, b, pa, pb, pi = v2, v0, v1, p0, p1, p2
    if fill:
        t = iv / (iv - a)
        s = iv / (iv - b)
        for d in range(pi.shape[0]):
            out[k, 0, d] = pi[d] + t * (pa[d] - pi[d])
            out[k, 1, d] = pi[d] + s * (pb[d] - pi[d])
    return k + 1


@njit(cache=True)
def _nb_march_grid2(vals, px, py, out, fill):
    nx, ny = vals.shape
    cx = nx if px else nx - 1
    cy = ny if py else ny - 1
    k = 0
    pa = np.empty(2)
    pb = np.empty(2)
    pc = np.empty(2)
    pd = np.empty(2)
    for i in range(cx):
        i1 = (i + 1) % nx
        for j in range(cy):
            j1 = (j + 1) % ny
            va = vals[i, j]
            vb = vals[i1, j]
            vc = vals[i1, j1]
            vd = vals[i, j1]
            pa[0] = i
            pa[1] = j
            pb[0] = i + 1
            pb[1] = j
            pc[0] = i + 1
            pc[1] = j + 1
            pd[0] = i
            pd[1] = j + 1
            k = _nb_tri_cross(va, vb, vc, pa, pb, pc, out, k, fill)
            k = _nb_tri_cross(va, vc, vd, pa, pc, pd, out, k, fill)
    return k


@njit(cache=True)
def _nb_march_tris(verts, tris, vals, out, fill):
    k = 0
    for t in range(tris.shape[0]):
        a, b, c = tris[t, 0], tris[t, 1], tris[t, 2]
        k = _nb_tri_cross(vals[a], vals[b], vals[c], verts[a], verts[b], verts[c], out, k, fill)
    return k


@njit(cache=True)
def _nb_lerp(p, q, vp, vq, out, row, col):
    t = vp / (vp - vq)
    for d in range(3):
        out[row, col, d] = p[d] + t * (q[d] - p[d])


@njit(cache=True)
def _nb_march_grid3(vals, cube, kuhn, out, fill):
    n0, n1, n2 = vals.shape
    k = 0
    tv = np.empty(4)
    tp = np.empty((4, 3))
    one = np.empty(4, dtype=np.int64)
    zero = np.empty(4, dtype=np.int64)
    for i in range(n0):
        for j in range(n1):
            for l in range(n2):
                for s in range(6):
                    for q in range(4):
                        o = cube[kuhn[s, q]]
                        tv[q] = vals[(i + o[0]) % n0, (j + o[1]) % n1, (l + o[2]) % n2]
                        tp[q, 0] = i + o[0]
                        tp[q, 1] = j + o[1]
                        tp[q, 2] = l + o[2]
                    n1s = 0
                    n0s = 0
                    for q in range(4):
                        if tv[q] > 0:
                            one[n1s] = q
                            n1s += 1
                        else:
                            zero[n0s] = q
                            n0s += 1
                    if n1s == 0 or n1s == 4:
                        continue
                    if n1s == 1 or n1s == 3:
                        if n1s == 1:
                            iso = one[0]
                            rest = zero
                        else:
                            iso = zero[0]
                            rest = one
                        if fill:
                            for e in range(3):
                                r = rest[e]
                                _nb_lerp(tp[iso], tp[r], tv[iso], tv[r], out, k, e)
                        k += 1
                    else:
                        a0, a1, b0, b1 = one[0], one[1], zero[0], zero[1]
                        if fill:
                            _nb_lerp(tp[a0], tp[b0], tv[a0], tv[b0], out, k, 0)
                            _nb_lerp(tp[a0], tp[b1], tv[a0], tv[b1], out, k, 1)
                            _nb_lerp(tp[a1], tp[b1], tv[a1], tv[b1], out, k, 2)
                            _nb_lerp(tp[a0], tp[b0], tv[a0], tv[b0], out, k + 1, 0)
                            _nb_lerp(tp[a1], tp[b1], tv[a1], tv[b1], out, k + 1, 1)
                            _nb_lerp(tp[a1], tp[b0], tv[a1], tv[b0], out, k + 1, 2)
                        k += 2
    return k


@njit(cache=True)
def _nb_pt_sqdist(x, cx, period, unit):
    if unit:
        nrm = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    else:
        nrm = 1.0
    d2 = 0.0
    for a in range(3):
        dx = abs(x[a] / nrm - cx[a])
        if period[a] > 0 and dx > 0.5 * period[a]:
            dx = period[a] - dx
        d2 += dx * dx
    return d2


@njit(cache=True)
def _nb_clip_measure(
    srt, order, start, m, lo, cs, period, span, width, pieces, measures, centers, thr2, cut2,
    unit,
):
    nc = centers.shape[0]
    k = pieces.shape[1]
    out = np.zeros(nc)
    cells = np.empty((3, width), dtype=np.int64)
    gaps = np.empty((3, width))
    ncell = np.empty(3, dtype=np.int64)
    kid = np.empty(3)
    for c in range(nc):
        cx = centers[c]
        _nb_cells(cx, lo, cs, m, period, span, cells, gaps, ncell)
        tot = 0.0
        for i0 in range(ncell[0]):
            for i1 in range(ncell[1]):
                g01 = gaps[0, i0] + gaps[1, i1]
                if g01 > cut2:
                    continue
                for i2 in range(ncell[2]):
                    if g01 + gaps[2, i2] > cut2:
                        continue
                    cid = (cells[0, i0] * m[1] + cells[1, i1]) * m[2] + cells[2, i2]
                    for t in range(start[cid], start[cid + 1]):
                        if _nb_sqdist(srt, t, cx, period) > cut2:
                            continue
                        j = t
                        inside = True
                        for v in range(k):
                            if _nb_pt_sqdist(pieces[j, v], cx, period, unit) > thr2:
                                inside = False
                                break
                        if inside:
                            tot += measures[j]
                            continue
                        hits = 0
                        if k == 2:
                            for w in range(2):
                                f0 = 0.75 if w == 0 else 0.25
                                for a in range(3):
                                    kid[a] = f0 * pieces[j, 0, a] + (1.0 - f0) * pieces[j, 1, a]
                                if _nb_pt_sqdist(kid, cx, period, unit) <= thr2:
                                    hits += 1
                            tot += 0.5 * hits * measures[j]
                        else:
                            for w in range(4):
                                for a in range(3):
                                    p0 = pieces[j, 0, a]
                                    p1 = pieces[j, 1, a]
                                    p2 = pieces[j, 2, a]
                                    if w == 0:
                                        kid[a] = (4.0 * p0 + p1 + p2) / 6.0
                                    elif w == 1:
                                        kid[a] = (p0 + 4.0 * p1 + p2) / 6.0
                                    elif w == 2:
                                        kid[a] = (p0 + p1 + 4.0 * p2) / 6.0
                                    else:
                                        kid[a] = (p0 + p1 + p2) / 3.0
                                if _nb_pt_sqdist(kid, cx, period, unit) <= thr2:
                                    hits += 1
                            tot += 0.25 * hits * measures[j]
        out[c] = tot
    return out


@njit(cache=True)
def _nb_neumaier(x):
    s = 0.0
    c = 0.0
    for v in x:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


# ---------------------------------------------------------------- numpy side


def _np_ball_reduce(grid, centers, thr2, values):
    nc = centers.shape[0]
    nk = values.shape[1]
    sums = np.zeros((nc, nk))
    maxs = np.full((nc, nk), -np.inf)
    counts = np.zeros(nc, dtype=np.int64)
    for c in range(nc):
        idx = grid.candidates(centers[c], thr2)
        idx = idx[_sqdist_np(grid.coords[idx], centers[c], grid.period) <= thr2]
        counts[c] = idx.size
        if idx.size:
            v = values[idx]
            sums[c] = [math.fsum(col) for col in v.T]
            maxs[c] = v.max(axis=0)
    return sums, maxs, counts


def _np_ball_counts(grid, centers, thr2):
    counts = np.zeros(grid.coords.shape[0], dtype=np.int64)
    for c in range(centers.shape[0]):
        idx = grid.candidates(centers[c], thr2)
        counts[idx[_sqdist_np(grid.coords[idx], centers[c], grid.period) <= thr2]] += 1
    return counts


def _np_greedy_pack(grid, thr2):
    # equivalent to the index-order scan: after accepting a centre, every point
    # strictly inside its exclusion radius is blocked; the next unblocked index
    # is the next centre
    n = grid.coords.shape[0]
    blocked = np.zeros(n, dtype=bool)
    chosen = []
    i = 0
    while i < n:
        chosen.append(i)
        idx = grid.candidates(grid.coords[i], thr2)
        blocked[idx[_sqdist_np(grid.coords[idx], grid.coords[i], grid.period) < thr2]] = True
        free = np.flatnonzero(~blocked[i + 1 :])
        if free.size == 0:
            break
        i = i + 1 + int(free[0])
    return np.asarray(chosen, dtype=np.int64)


def _np_tri_cross(v, p):
    """v: (T, 3) vertex values, p: (T, 3, D) vertex coordinates."""
    c = v > 0
    s = c.sum(axis=1)
    keep = (s == 1) | (s == 2)
    v, p, c = v[keep], p[keep], c[keep]
    # the isolated vertex is the one whose class differs from the other two
    iso = np.where(c[:, 1] == c[:, 2], 0, np.where(c[:, 0] == c[:, 2], 1, 2))
    ia = (iso + 1) % 3
    ib = (iso + 2) % 3
    r = np.arange(v.shape[0])
    vi, va, vb = v[r, iso], v[r, ia], v[r, ib]
    pi, pa, pb = p[r, iso], p[r, ia], p[r, ib]
    t = (vi / (vi - va))[:, None]
    u = (vi / (vi - vb))[:, None]
    return np.stack([pi + t * (pa - pi), pi + u * (pb - pi)], axis=1)


def _np_march_grid2(vals, px, py):
    nx, ny = vals.shape
    cx = nx if px else nx - 1
    cy = ny if py else ny - 1
    i = np.arange(cx)[:, None].repeat(cy, 1).ravel()
    j = np.arange(cy)[None, :].repeat(cx, 0).ravel()
    i1 = (i + 1) % nx
    j1 = (j + 1) % ny
    va, vb, vc, vd = vals[i, j], vals[i1, j], vals[i1, j1], vals[i, j1]
    fi = i.astype(np.float64)
    fj = j.astype(np.float64)
    pa = np.stack([fi, fj], -1)
    pb = np.stack([fi + 1, fj], -1)
    pc = np.stack([fi + 1, fj + 1], -1)
    pd = np.stack([fi, fj + 1], -1)
    # interleave the two triangles of each cell to match the scan order
    v = np.stack([np.stack([va, vb, vc], -1), np.stack([va, vc, vd], -1)], 1).reshape(-1, 3)
    p = np.stack([np.stack([pa, pb, pc], 1), np.stack([pa, pc, pd], 1)], 1).reshape(-1, 3, 2)
    return _np_tri_cross(v, p)


def _np_march_tris(verts, tris, vals):
    return _np_tri_cross(vals[tris], verts[tris])


def _np_lerp(p, q, vp, vq):
    return p + (vp / (vp - vq))[:, None] * (q - p)


def _np_march_grid3(vals):
    n0, n1, n2 = vals.shape
    out = []
    jj, ll = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    jj = jj.ravel()
    ll = ll.ravel()
    for i in range(n0):
        # (cells, 6 tets, 4 verts) in scan order
        offs = _CUBE[_KUHN]  # (6, 4, 3)
        ci = i + offs[None, :, :, 0]
        cj = jj[:, None, None] + offs[None, :, :, 1]
        cl = ll[:, None, None] + offs[None, :, :, 2]
        tv = vals[ci % n0, cj % n1, cl % n2].reshape(-1, 4)
        tp = np.stack(np.broadcast_arrays(ci, cj, cl), -1).reshape(-1, 4, 3).astype(np.float64)
        c = tv > 0
        s = c.sum(1)
        tris = np.zeros((tv.shape[0], 2, 3, 3))
        ntri = np.zeros(tv.shape[0], dtype=np.int64)
        r = np.arange(tv.shape[0])
        # vertex classes sorted: ones first (stable), then zeros
        key = np.argsort(~c, axis=1, kind="stable")
        odd = (s == 1) | (s == 3)
        if odd.any():
            ro = r[odd]
            k = key[odd]
            so = s[odd]
            iso = np.where(so == 1, k[:, 0], k[:, 3])
            rest = np.where((so == 1)[:, None], k[:, 1:4], k[:, 0:3])
            for e in range(3):
                tris[ro, 0, e] = _np_lerp(
                    tp[ro, iso], tp[ro, rest[:, e]], tv[ro, iso], tv[ro, rest[:, e]]
                )
            ntri[ro] = 1
        even = s == 2
        if even.any():
            re = r[even]
            k = key[even]
            a0, a1, b0, b1 = k[:, 0], k[:, 1], k[:, 2], k[:, 3]
            p00 = _np_lerp(tp[re, a0], tp[re, b0], tv[re, a0], tv[re, b0])
            p01 = _np_lerp(tp[re, a0], tp[re, b1], tv[re, a0], tv[re, b1])
            p11 = _np_lerp(tp[re, a1], tp[re, b1], tv[re, a1], tv[re, b1])
            p10 = _np_lerp(tp[re, a1], tp[re, b0], tv[re, a1], tv[re, b0])
            tris[re, 0] = np.stack([p00, p01, p11], 1)
            tris[re, 1] = np.stack([p00, p11, p10], 1)
            ntri[re] = 2
        sel = np.arange(2)[None, :] < ntri[:, None]
        out.append(tris[sel])
    return np.concatenate(out) if out else np.zeros((0, 3, 3))


def _np_pt_sqdist(x, center, period, unit):
    if unit:
        x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    d = np.abs(x - center)
    d = np.where((period > 0) & (d > 0.5 * period), period - d, d)
    return np.sum(d * d, axis=-1)


def _np_clip_measure(grid, pieces, measures, centers, thr2, cut2, unit):
    """Children are the midpoint-split halves of a segment, or the four
    triangles of the midpoint split (represented by their centroids)."""
    k = pieces.shape[1]
    out = np.zeros(centers.shape[0])
    for c in range(centers.shape[0]):
        idx = grid.candidate_slots(centers[c], cut2)
        idx = idx[_sqdist_np(grid.sorted[idx], centers[c], grid.period) <= cut2]
        if idx.size == 0:
            continue
        pcs = pieces[idx]
        inside = np.all(_np_pt_sqdist(pcs, centers[c], grid.period, unit) <= thr2, axis=1)
        rest = pcs[~inside]
        if k == 2:
            kids = np.stack([0.75 * rest[:, 0] + 0.25 * rest[:, 1],
                             0.25 * rest[:, 0] + 0.75 * rest[:, 1]], 1)
            frac = 0.5
        else:
            p0, p1, p2 = rest[:, 0], rest[:, 1], rest[:, 2]
            kids = np.stack([(4.0 * p0 + p1 + p2) / 6.0, (p0 + 4.0 * p1 + p2) / 6.0,
                             (p0 + p1 + 4.0 * p2) / 6.0, (p0 + p1 + p2) / 3.0], 1)
            frac = 0.25
        hits = np.sum(_np_pt_sqdist(kids, centers[c], grid.period, unit) <= thr2, axis=1)
        w = np.where(inside, 1.0, 0.0)
        w[~inside] = frac * hits
        out[c] = float(np.sum(w * measures[idx]))
    return out


# ---------------------------------------------------------------- public API


def ball_reduce(grid: CellGrid, centers, thr2: float, values):
    """Per-centre sums, maxima and point counts of ``values`` over closed balls.

    ``values`` is (N, K); returns ``(sums (C, K), maxs (C, K), counts (C,))``.
    Empty balls report max ``-inf``.
    """
    centers = _wrap_centers(np.atleast_2d(centers), grid.period)
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if USE_NUMBA:
        return _nb_ball_reduce(*grid.args(), centers, float(thr2), values)
    return _np_ball_reduce(grid, centers, thr2, values)


def ball_counts(grid: CellGrid, centers, thr2: float):
    """For every point, the number of centres whose closed ball contains it."""
    centers = _wrap_centers(np.atleast_2d(centers), grid.period)
    if USE_NUMBA:
        return _nb_ball_counts(*grid.args(), centers, float(thr2))
    return _np_ball_counts(grid, centers, thr2)


def greedy_pack(grid: CellGrid, thr2: float):
    """Index-order maximal packing: point i becomes a centre iff its squared
    distance to every earlier centre is >= ``thr2``."""
    if USE_NUMBA:
        return _nb_greedy_pack(
            grid.coords, grid.m, grid.lo, grid.cs, grid.period, grid.span, grid.width, float(thr2)
        )
    return _np_greedy_pack(grid, thr2)


def march_grid2(vals, periodic=(True, True)):
    """Zero-level segments of the PL interpolant on a split-square grid.

    Returns (S, 2, 2) endpoints in fractional index coordinates.
    """
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    px, py = bool(periodic[0]), bool(periodic[1])
    if USE_NUMBA:
        dummy = np.empty((0, 2, 2))
        k = _nb_march_grid2(vals, px, py, dummy, False)
        out = np.empty((k, 2, 2))
        _nb_march_grid2(vals, px, py, out, True)
        return out
    return _np_march_grid2(vals, px, py)


def march_tris(verts, tris, vals):
    """Zero-level segments on a triangle mesh; returns (S, 2, 3)."""
    verts = np.ascontiguousarray(verts, dtype=np.float64)
    tris = np.ascontiguousarray(tris, dtype=np.int64)
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    if USE_NUMBA:
        dummy = np.empty((0, 2, 3))
        k = _nb_march_tris(verts, tris, vals, dummy, False)
        out = np.empty((k, 2, 3))
        _nb_march_tris(verts, tris, vals, out, True)
        return out
    return _np_march_tris(verts, tris, vals)


def march_grid3(vals):
    """Zero-level triangles on a periodic cube grid (6 Kuhn tetrahedra per
    cube); returns (T, 3, 3) in fractional index coordinates."""
    vals = np.ascontiguousarray(vals, dtype=np.float64)
    if USE_NUMBA:
        dummy = np.empty((0, 3, 3))
        k = _nb_march_grid3(vals, _CUBE, _KUHN, dummy, False)
        out = np.empty((k, 3, 3))
        _nb_march_grid3(vals, _CUBE, _KUHN, out, True)
        return out
    return _np_march_grid3(vals)


class PieceGrid:
    """Cell list over the midpoints of level-set pieces (P, 2|3, 3), with the
    pieces stored in cell order. Valid for ball thresholds up to ``reach``
    (embedded distance)."""

    def __init__(self, pieces, measures, period, reach):
        pieces = np.asarray(pieces, dtype=np.float64)
        mids = pieces.mean(axis=1)
        self.spread = float(np.sqrt(np.max(np.sum((pieces - mids[:, None]) ** 2, axis=-1))))
        self.reach = float(reach)
        self.grid = CellGrid(mids, period, mids.min(axis=0) - 1e-9, mids.max(axis=0) + 1e-9,
                             self.reach + 2.0 * self.spread + 1e-9)
        self.pieces = np.ascontiguousarray(pieces[self.grid.order])
        self.measures = np.ascontiguousarray(measures, dtype=np.float64)[self.grid.order]

    def __len__(self):
        return self.pieces.shape[0]


def clip_measure(pg: PieceGrid, centers, thr2: float, unit: bool = False):
    """Measure of level-set pieces inside closed balls.

    A piece whose vertices all lie in the ball counts fully; otherwise it is
    split once (segments in halves, triangles in four) and each child counts
    iff its midpoint lies in the ball. ``unit`` projects points to the unit
    sphere before measuring chords. Pieces whose midpoint is farther than
    sqrt(thr2) + 2 * spread are skipped, ``spread`` being the largest
    midpoint-to-vertex distance.
    """
    if not math.isinf(thr2) and math.sqrt(thr2) > pg.reach * (1 + 1e-12):
        raise ValueError("ball threshold exceeds the piece grid reach")
    grid = pg.grid
    centers = _wrap_centers(np.atleast_2d(centers), grid.period)
    if len(pg) == 0:
        return np.zeros(centers.shape[0])
    cut2 = math.inf if math.isinf(thr2) else (math.sqrt(thr2) + 2.0 * pg.spread) ** 2
    if USE_NUMBA:
        return _nb_clip_measure(
            *grid.args(), pg.pieces, pg.measures, centers, float(thr2), cut2, bool(unit)
        )
    return _np_clip_measure(grid, pg.pieces, pg.measures, centers, thr2, cut2, bool(unit))


def csum(x) -> float:
    """Compensated sum in index order."""
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if USE_NUMBA:
        return float(_nb_neumaier(x))
    return math.fsum(x)
