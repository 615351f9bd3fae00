"""L^p norms by quadrature, Sogge exponents and log-log scaling fits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .eigenmodes import SampledField
from .errors import DomainError, InsufficientSweepError


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log(value) = slope * log(lambda) + intercept."""

    samples: tuple
    slope: float
    intercept: float
    r2: float

    def predict(self, lam):
        return np.exp(self.intercept) * np.asarray(lam, dtype=np.float64) ** self.slope


def loglog_fit(samples) -> ScalingFit:
    samples = tuple((float(a), float(b)) for a, b in samples)
    if len(samples) < 3:
        raise InsufficientSweepError("a scaling fit needs at least 3 samples")
    lam = np.array([s[0] for s in samples])
    val = np.array([s[1] for s in samples])
    if np.any(lam <= 0) or np.any(val <= 0):
        raise DomainError("log-log fit needs positive samples")
    x = np.log(lam)
    y = np.log(val)
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0:
        raise InsufficientSweepError("all lambda values coincide")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return ScalingFit(samples, slope, intercept, r2)


def require_sweep(lams, min_count=5, min_span=8.0):
    lams = sorted(set(float(x) for x in lams))
    if len(lams) < min_count or lams[-1] < min_span * lams[0]:
        raise InsufficientSweepError(
            f"need >= {min_count} lambda values spanning a factor >= {min_span}"
        )


def lp_norm(f: SampledField, p) -> float:
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(f.values)))
    p = float(p)
    if p < 1:
        raise DomainError("p must be >= 1")
    return kernels.csum(f.quad.weights * np.abs(f.values) ** p) ** (1.0 / p)


def critical_p(n: int) -> float:
    if n < 2:
        raise DomainError("n must be >= 2")
    return 2.0 * (n + 1) / (n - 1)


def sogge_exponent(n: int, p) -> float:
    """Growth exponent e(n, p) in ||u||_p <= C lambda^e(n, p)."""
    if p == math.inf or p == "inf":
        return (n - 1) / 4.0
    p = float(p)
    if p < 2:
        raise DomainError("p must be >= 2")
    if p >= critical_p(n):
        return (n * (p - 2) - p) / (4.0 * p)
    return (n - 1) * (p - 2) / (8.0 * p)


def lp_scaling(fields, p) -> ScalingFit:
    fields = list(fields)
    require_sweep([f.eigenvalue for f in fields])
    return loglog_fit([(f.eigenvalue, lp_norm(f, p)) for f in fields])
