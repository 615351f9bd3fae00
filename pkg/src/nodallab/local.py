"""Spherical averages about a point, the average-ratio bound at zeros and the
mean-value constant on wavelength balls."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigenmodes import SampledField
from .errors import ConfigError, DegenerateFieldError, DomainError, ResolutionError
from .geometry import ManifoldModel, ball_mask, ball_reduce, distance, laplacian_of_distance_defect


# width of the linear ramp on shell edges, in grid spacings
SHELL_RAMP = 3.0


def rbar(m: ManifoldModel) -> float:
    """Scale below which the average-ratio bound is asserted: 0.2 x injectivity scale."""
    return 0.2 * m.injectivity_scale


def _point(m: ManifoldModel, p):
    p = np.asarray(p, dtype=np.float64).reshape(1, -1)
    return p


@dataclass(eq=False)
class SphereAverageProfile:
    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    abs_values: np.ndarray
    delta: np.ndarray


def _shells(f: SampledField, p, radii, delta, columns):
    """Sums of ``columns`` over the shells |d - s| <= delta/2 and the number of
    quadrature points in each. Shell edges carry a linear ramp SHELL_RAMP grid
    spacings wide, so lattice rows (and latitude rows on the sphere) do not
    enter or leave the shell all at once."""
    m, quad = f.manifold, f.quad
    p = _point(m, p)
    h = SHELL_RAMP * quad.spacing
    radii = np.asarray(radii, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    reach = float(np.max(radii + 0.5 * delta)) + h
    idx = np.flatnonzero(ball_mask(m, quad, p, reach))
    d = distance(m, p[0], quad.points[idx])
    cols = columns[idx]
    out = np.empty((radii.size, cols.shape[1]))
    counts = np.empty(radii.size, dtype=np.int64)
    for j, (s, dl) in enumerate(zip(radii, delta)):
        lo, hi = s - 0.5 * dl, s + 0.5 * dl
        wt = np.clip((hi - d) / h + 0.5, 0.0, 1.0) - np.clip((lo - d) / h + 0.5, 0.0, 1.0)
        out[j] = wt @ cols
        counts[j] = int(np.count_nonzero((d >= lo) & (d <= hi)))
    return out, counts


def _default_delta(f: SampledField, s):
    return max(2.0 * f.quad.spacing, s / 20.0)


def spherical_average(f: SampledField, p, s: float, delta: float | None = None,
                      absolute: bool = False) -> float:
    """Thin-shell estimate of I_v(s) = s^(1-n) int_{dB_s(p)} v, with v = u or |u|."""
    m = f.manifold
    if not 0 < s < m.injectivity_scale:
        raise DomainError("need 0 < s < injectivity scale")
    if delta is None:
        delta = _default_delta(f, s)
    if delta > s / 4.0:
        raise ResolutionError(f"shell width {delta:.4g} exceeds s/4; refine the quadrature")
    v = np.abs(f.values) if absolute else f.values
    sums, counts = _shells(f, p, [s], [delta], (f.quad.weights * v)[:, None])
    if counts[0] < 20:
        raise ResolutionError(f"shell holds {counts[0]} quadrature points (< 20)")
    return float(sums[0, 0]) / delta * s ** (1 - m.n)


def average_profile(f: SampledField, p, radii) -> SphereAverageProfile:
    """I_u and I_|u| on a radius grid (one pass of shell sums per radius)."""
    m = f.manifold
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(radii <= 0) or np.any(radii >= m.injectivity_scale):
        raise DomainError("radii must lie in (0, injectivity scale)")
    delta = np.array([_default_delta(f, s) for s in radii])
    if np.any(delta > radii / 4.0):
        raise ResolutionError("shell width exceeds s/4 at the smallest radii")
    w = f.quad.weights
    cols = np.stack([w * f.values, w * np.abs(f.values)], axis=1)
    sums, counts = _shells(f, p, radii, delta, cols)
    if np.any(counts < 20):
        raise ResolutionError(f"a shell holds only {int(counts.min())} quadrature points")
    scale = radii ** (1 - m.n) / delta
    return SphereAverageProfile(
        np.asarray(p, dtype=np.float64), radii, sums[:, 0] * scale, sums[:, 1] * scale, delta
    )


def _value_at(f: SampledField, p) -> float:
    """u(p) from the evaluator, else from the nearest quadrature point."""
    c = _point(f.manifold, p)
    if f.evaluator is not None:
        return float(f.evaluate(c)[0])
    j = int(np.argmin(distance(f.manifold, c[0], f.quad.points)))
    return float(f.values[j])


def _check_zero(f: SampledField, p, tol=1e-6):
    if f.evaluator is None:
        return
    val = abs(_value_at(f, p))
    if val > tol * float(np.max(np.abs(f.values))):
        raise DomainError(f"|u(p)| = {val:.3g} is not an empirical zero")


def average_ratio(f: SampledField, p, r: float, limit: float | None = None) -> float:
    """|int_{B_r(p)} u| / int_{B_r(p)} |u| at a zero p. ``limit`` caps r (defaults
    to rbar); pass ``math.inf`` to record ratios above the asserted scale."""
    if limit is None:
        limit = rbar(f.manifold)
    if r > limit:
        raise DomainError(f"r = {r:.4g} exceeds the configured scale {limit:.4g}")
    _check_zero(f, p)
    w = f.quad.weights
    cols = np.stack([w * f.values, w * np.abs(f.values)], axis=1)
    sums, _, _ = ball_reduce(f.manifold, f.quad, _point(f.manifold, p), r, cols)
    if not sums[0, 1] > 0:
        raise DegenerateFieldError("int |u| vanishes on the ball")
    return abs(float(sums[0, 0])) / float(sums[0, 1])


def mean_value_constant(f: SampledField, p, r: float) -> float:
    """sup_{B_{r/2}(p)} |u| * r^n / int_{B_r(p)} |u|."""
    if r <= 0:
        raise DomainError("radius must be positive")
    m = f.manifold
    a = np.abs(f.values)
    c = _point(m, p)
    _, sup, cnt_in = ball_reduce(m, f.quad, c, 0.5 * r, a)
    mass, _, cnt = ball_reduce(m, f.quad, c, r, f.quad.weights * a)
    if cnt_in[0] == 0 or cnt[0] == 0:
        raise ResolutionError("ball contains no quadrature point")
    if not mass[0, 0] > 0:
        raise DegenerateFieldError("int |u| vanishes on the ball")
    return float(sup[0, 0]) * r**m.n / float(mass[0, 0])


@dataclass(eq=False)
class GrowthProfile:
    radii: np.ndarray
    i_u: np.ndarray
    i_abs: np.ndarray
    derivative: np.ndarray
    bound: np.ndarray

    @property
    def residual(self):
        return np.abs(self.derivative) - self.bound

    def holds(self, rel_tol: float = 0.1, abs_tol: float | None = None) -> bool:
        """Residual <= rel_tol * bound + abs_tol; the default abs_tol of
        1e-9 max I_|u| absorbs round-off when both sides vanish."""
        if abs_tol is None:
            abs_tol = 1e-9 * float(np.max(self.i_abs))
        return bool(np.all(self.residual <= rel_tol * self.bound + abs_tol))

    def table(self):
        return {"s": self.radii, "I_u": self.i_u, "I_abs_u": self.i_abs,
                "dI_u": self.derivative, "rhs": self.bound}


def average_growth_residual(f: SampledField, p, radii, lam: float | None = None) -> GrowthProfile:
    """Finite-difference |I_u'(s)| against (lam s / n) max_{t<=s}|I_u(t)| + h(s) I_|u|(s)."""
    radii = np.asarray(radii, dtype=np.float64)
    if radii.size < 8:
        raise ConfigError("need at least 8 radii for finite differences")
    if np.any(np.diff(radii) <= 0):
        raise ConfigError("radii must be strictly increasing")
    m = f.manifold
    lam = f.eigenvalue if lam is None else float(lam)
    prof = average_profile(f, p, radii)
    deriv = np.gradient(prof.values, radii, edge_order=2)
    # I_u(s) -> omega_n u(p) as s -> 0, which seeds the running max below s_1
    running = np.maximum.accumulate(np.abs(prof.values))
    running = np.maximum(running, flat_sphere_constant(m.n) * abs(_value_at(f, p)))
    h = np.array([laplacian_of_distance_defect(m, p, s) for s in radii])
    bound = lam * radii / m.n * running + h * prof.abs_values
    return GrowthProfile(radii, prof.values, prof.abs_values, deriv, bound)


def flat_sphere_constant(n: int) -> float:
    """Area of the unit (n-1)-sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
