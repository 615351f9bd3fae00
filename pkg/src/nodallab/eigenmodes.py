"""Closed-form Laplace eigenfunctions sampled on quadrature grids.

Every constructor returns a field normalised by quadrature so that the
discrete integral of u^2 is one; the analytic evaluator carries the same scale.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateFieldError, DomainError
from .geometry import ManifoldModel, Quadrature, sphere_angles


@dataclass(frozen=True, eq=False)
class SampledField:
    manifold: ManifoldModel
    quad: Quadrature
    values: np.ndarray = field(repr=False)
    eigenvalue: float
    evaluator: Callable | None = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        self.values.setflags(write=False)

    def integral(self, g=None) -> float:
        return self.quad.integrate(self.values if g is None else g)

    def l2sq(self) -> float:
        return self.quad.integrate(self.values * self.values)

    def evaluate(self, pts) -> np.ndarray:
        if self.evaluator is None:
            raise DomainError("field has no evaluator")
        return self.evaluator(np.asarray(pts, dtype=np.float64))

    def scaled(self, c: float) -> "SampledField":
        ev = self.evaluator
        scaled_ev = None if ev is None else (lambda p, ev=ev, c=c: c * ev(p))
        return SampledField(
            self.manifold, self.quad, self.values * c, self.eigenvalue, scaled_ev, self.label
        )


def normalize_l2(f: SampledField) -> SampledField:
    s = f.l2sq()
    if not s > 0:
        raise DegenerateFieldError("field is identically zero under quadrature")
    return f.scaled(1.0 / math.sqrt(s))


def field_from_evaluator(m, quad, evaluator, eigenvalue, label="") -> SampledField:
    values = np.asarray(evaluator(quad.points), dtype=np.float64)
    raw = SampledField(m, quad, values, float(eigenvalue), evaluator, label)
    return normalize_l2(raw)


def constant_field(m, quad, c: float = 1.0) -> SampledField:
    """Validation input only: not an eigenfunction and not normalised."""
    return SampledField(
        m, quad, np.full(len(quad), float(c)), 0.0, lambda p, c=c: np.full(len(p), c), "const"
    )


# ---------------------------------------------------------------- torus


def torus_mode(m: ManifoldModel, quad: Quadrature, k, phase="sin") -> SampledField:
    """Product of sin/cos(2 pi k_i x_i / L_i); axes with k_i = 0 contribute 1.

    ``phase`` is 'sin', 'cos' or one entry per axis.
    """
    if m.kind != "flat-torus":
        raise DomainError("torus_mode needs a flat torus")
    k = np.asarray(k, dtype=np.int64).reshape(-1)
    if k.size != m.n:
        raise DomainError("wave vector length must equal the dimension")
    if not np.any(k):
        raise DomainError("k = 0 is the constant mode (zero eigenvalue)")
    phases = (phase,) * m.n if isinstance(phase, str) else tuple(phase)
    if len(phases) != m.n or any(p not in ("sin", "cos") for p in phases):
        raise DomainError("phase must be 'sin'/'cos' per axis")
    freq = np.array([2.0 * math.pi * ki / L for ki, L in zip(k, m.periods)])
    lam = float(np.sum(freq * freq))
    amp2 = 1.0
    for ki, L in zip(k, m.periods):
        amp2 *= L / 2.0 if ki else L
    amp = 1.0 / math.sqrt(amp2)
    trig = [np.sin if (p == "sin" and ki) else np.cos for p, ki in zip(phases, k)]

    def ev(pts):
        out = np.full(pts.shape[0], amp)
        for a in range(m.n):
            if k[a]:
                out = out * trig[a](freq[a] * pts[:, a])
        return out

    return field_from_evaluator(m, quad, ev, lam, f"torus k={tuple(int(x) for x in k)}")


# ---------------------------------------------------------------- sphere


def legendre(l: int, x):
    """P_l(x) by the three-term upward recurrence."""
    x = np.asarray(x, dtype=np.float64)
    p0 = np.ones_like(x)
    if l == 0:
        return p0
    p1 = x.copy()
    for j in range(1, l):
        p0, p1 = p1, ((2 * j + 1) * x * p1 - j * p0) / (j + 1)
    return p1


def _log_beam_norm(l: int) -> float:
    # int_0^pi sin^(2l+1) = 2 prod_{j<=l} 2j/(2j+1); area integral adds a factor pi
    log_i = math.log(2.0) + sum(math.log(2.0 * j / (2.0 * j + 1.0)) for j in range(1, l + 1))
    return -0.5 * (math.log(math.pi) + log_i)


def sphere_harmonic(m: ManifoldModel, quad: Quadrature, l: int, kind: str = "zonal") -> SampledField:
    """Zonal P_l(cos theta) or highest-weight beam sin^l(theta) cos(l phi)."""
    if m.kind != "round-sphere":
        raise DomainError("sphere_harmonic needs the round sphere")
    if l < 1:
        raise DomainError("degree must be >= 1")
    if kind == "zonal":
        c = math.sqrt((2 * l + 1) / (4.0 * math.pi))

        def ev(pts):
            return c * legendre(l, pts[:, 2])

    elif kind == "beam":
        logc = _log_beam_norm(l)

        def ev(pts):
            st = np.hypot(pts[:, 0], pts[:, 1])
            phi = np.arctan2(pts[:, 1], pts[:, 0])
            with np.errstate(divide="ignore"):
                mag = np.exp(l * np.log(st) + logc)
            return mag * np.cos(l * phi)

    else:
        raise DomainError(f"unknown harmonic kind {kind!r}")
    return field_from_evaluator(m, quad, ev, l * (l + 1), f"{kind} l={l}")


def eigenspace_sample(m: ManifoldModel, quad: Quadrature, index: int, seed: int) -> SampledField:
    """Random element of one eigenspace, deterministic in ``seed``.

    Sphere: ``index`` is the degree l; the sample is a Gaussian combination of
    2l+1 zonal harmonics about random axes, which span the degree-l space.
    Torus: ``index`` is |k|^2 for integer k; the sample combines cos/sin(k.x)
    over lattice vectors k (up to sign) of that norm.
    """
    rng = np.random.default_rng(np.uint64(seed))
    if m.kind == "round-sphere":
        l = int(index)
        if l < 1:
            raise DomainError("degree must be >= 1")
        axes = rng.standard_normal((2 * l + 1, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        coef = rng.standard_normal(2 * l + 1)

        def ev(pts):
            out = np.zeros(pts.shape[0])
            for a, c in zip(axes, coef):
                out += c * legendre(l, np.clip(pts @ a, -1.0, 1.0))
            return out

        return field_from_evaluator(m, quad, ev, l * (l + 1), f"eigenspace l={l} seed={seed}")
    if m.kind == "flat-torus":
        ks = torus_lattice_shell(m.n, int(index))
        if not ks:
            raise DomainError(f"{index} is not a sum of {m.n} squares")
        freq = np.array([[2.0 * math.pi * ki / L for ki, L in zip(k, m.periods)] for k in ks])
        coef = rng.standard_normal((len(ks), 2))
        lam = float(np.sum(freq[0] ** 2))

        def ev(pts):
            ph = pts @ freq.T
            return np.cos(ph) @ coef[:, 0] + np.sin(ph) @ coef[:, 1]

        return field_from_evaluator(m, quad, ev, lam, f"eigenspace |k|^2={index} seed={seed}")
    raise DomainError("eigenspace sampling is defined for torus and sphere")


def torus_lattice_shell(n: int, norm2: int):
    """Integer vectors with |k|^2 = norm2, one of each +-k pair."""
    kmax = int(math.isqrt(norm2))
    out = []
    for k in itertools.product(range(-kmax, kmax + 1), repeat=n):
        if sum(x * x for x in k) != norm2:
            continue
        first = next(x for x in k if x != 0)
        if first > 0:
            out.append(k)
    return out


def eigenspace_dimension(m: ManifoldModel, index: int) -> int:
    if m.kind == "round-sphere":
        return 2 * int(index) + 1
    return 2 * len(torus_lattice_shell(m.n, int(index)))


# ---------------------------------------------------------------- checks


def laplace_residual(f: SampledField, pts, h: float = 1e-4) -> np.ndarray:
    """|Delta u + lambda u| at ``pts`` by central differences of the evaluator
    (torus: Cartesian; sphere: theta/phi away from the poles)."""
    pts = np.asarray(pts, dtype=np.float64)
    lam = f.eigenvalue
    u0 = f.evaluate(pts)
    if f.manifold.kind == "flat-torus":
        lap = np.zeros_like(u0)
        for a in range(f.manifold.n):
            e = np.zeros(f.manifold.n)
            e[a] = h
            lap += (f.evaluate(pts + e) - 2 * u0 + f.evaluate(pts - e)) / (h * h)
        return np.abs(lap + lam * u0)
    if f.manifold.kind == "round-sphere":
        from .geometry import sphere_points

        th, ph = sphere_angles(pts)

        def u(t, p):
            return f.evaluate(sphere_points(t, p))

        ut = (u(th + h, ph) - u(th - h, ph)) / (2 * h)
        utt = (u(th + h, ph) - 2 * u0 + u(th - h, ph)) / (h * h)
        upp = (u(th, ph + h) - 2 * u0 + u(th, ph - h)) / (h * h)
        st = np.sin(th)
        lap = utt + np.cos(th) / st * ut + upp / (st * st)
        return np.abs(lap + lam * u0)
    raise DomainError("no closed-form evaluator on meshes")
