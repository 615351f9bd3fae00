"""d-good balls: classification by the mass ratio between B and 2B, the
three-quarter mass lemma, and the volume / count consequences."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .covering import BallCover
from .eigenmodes import SampledField
from .errors import DomainError, ResolutionError
from .geometry import ball_mask, ball_reduce
from .lpnorms import ScalingFit, loglog_fit, lp_norm, require_sweep


class LemmaViolation(UserWarning):
    """Emitted (not raised) when a measured quantity falls below a lemma's
    floor; ``table`` holds the per-ball data behind it."""

    def __init__(self, message, table=None):
        super().__init__(message)
        self.table = table


@dataclass(eq=False)
class GoodBallReport:
    cover: BallCover
    d: float
    mass_b: np.ndarray
    mass_2b: np.ndarray
    good: np.ndarray
    n_good: int
    mass_good: float
    vol_good: float
    good_mask: np.ndarray = field(repr=False)
    warnings: list = field(default_factory=list)

    @property
    def ratio(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.mass_2b / self.mass_b

    def table(self):
        return {
            "ball": np.arange(len(self.good)),
            "mass_B": self.mass_b,
            "mass_2B": self.mass_2b,
            "ratio": self.ratio,
            "good": self.good.astype(int),
        }


def ball_mass(f: SampledField, center, r: float) -> float:
    w = f.quad.weights * f.values * f.values
    sums, _, counts = ball_reduce(f.manifold, f.quad, np.atleast_2d(center), r, w)
    if counts[0] == 0:
        raise ResolutionError("ball contains no quadrature point")
    return float(sums[0, 0])


def classify(f: SampledField, cover: BallCover, d: float) -> GoodBallReport:
    """Flag B_i good iff int_{2B_i} u^2 <= 2^d int_{B_i} u^2. Union mass and
    volume count each quadrature point once."""
    if not d > 1:
        raise DomainError("d must exceed 1")
    m, quad = f.manifold, f.quad
    w2 = quad.weights * f.values * f.values
    mb = ball_reduce(m, quad, cover.centers, cover.radius, w2)[0][:, 0]
    m2b = ball_reduce(m, quad, cover.centers, 2.0 * cover.radius, w2)[0][:, 0]
    notes = []
    zero = mb <= 0
    if zero.any():
        notes.append(f"{int(zero.sum())} balls with zero mass classified not good")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    good = (m2b <= 2.0**d * mb) & ~zero
    mask = ball_mask(m, quad, cover.centers[good], cover.radius)
    mass_good = kernels.csum(np.where(mask, w2, 0.0))
    vol_good = kernels.csum(np.where(mask, quad.weights, 0.0))
    return GoodBallReport(
        cover, float(d), mb, m2b, good, int(good.sum()), mass_good, vol_good, mask, notes
    )


def choose_d(c_m: float) -> float:
    """d_M with 2^-d_M C_M = 1/4."""
    if c_m < 1:
        raise DomainError("C_M must be >= 1")
    return math.log2(4.0 * c_m)


def good_mass_check(report: GoodBallReport, floor: float = 0.75 - 0.01) -> float:
    if report.mass_good < floor:
        warnings.warn(
            LemmaViolation(
                f"mass on good balls {report.mass_good:.4f} < {floor}", report.table()
            ),
            stacklevel=2,
        )
    return report.mass_good


def notgood_chain(report: GoodBallReport, c_m: float):
    """(sum over bad balls of int_B u^2, 2^-d sum_i int_{2B_i} u^2, 2^-d C_M):
    each term bounds the previous one."""
    s = 2.0 ** (-report.d)
    bad = kernels.csum(report.mass_b[~report.good])
    return bad, s * kernels.csum(report.mass_2b), s * c_m


def count_good_scaling(samples) -> ScalingFit:
    """Fit N_good against lambda from (lambda, N_good) samples."""
    samples = list(samples)
    require_sweep([s[0] for s in samples])
    return loglog_fit(samples)


def concentration_volume(f: SampledField, cover: BallCover, d: float) -> float:
    return classify(f, cover, d).vol_good


def holder_chain_check(f: SampledField, report: GoodBallReport, p: float):
    """Both sides of int_G u^2 <= Vol(G)^((p-2)/p) ||u||_p^2 with G = G_d."""
    if not p > 2:
        raise DomainError("p must exceed 2")
    norm = lp_norm(f, p)
    return report.mass_good, report.vol_good ** ((p - 2) / p) * norm * norm


def volume_floor(mass: float, norm_p: float, p: float) -> float:
    """mass^(p/(p-2)) ||u||_p^(-2p/(p-2)): the lower bound on Vol(G) obtained by
    solving the Hoelder chain for the volume."""
    e = p / (p - 2.0)
    return mass**e * norm_p ** (-2.0 * e)


def sobolev_check(f: SampledField, mask):
    """(int_G u^2, Vol(G)^(2/n) lambda) for G given by a point mask."""
    n = f.manifold.n
    if n < 3:
        raise DomainError("the Sobolev exponent 2n/(n-2) needs n >= 3")
    mask = np.asarray(mask, dtype=bool)
    w = f.quad.weights
    lhs = kernels.csum(np.where(mask, w * f.values * f.values, 0.0))
    vol = kernels.csum(np.where(mask, w, 0.0))
    return lhs, vol ** (2.0 / n) * f.eigenvalue


def volume_exponent(n: int, p: float) -> float:
    """Exponent of lambda in the volume floor for p at or above the critical
    exponent: p / (2 (p - 2)) - n / 2."""
    return p / (2.0 * (p - 2.0)) - n / 2.0
