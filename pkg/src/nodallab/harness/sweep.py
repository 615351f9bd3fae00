"""Sweep orchestration: one row per family member, then log-log fits."""
from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .. import covering as cv
from .. import eigenmodes as em
from .. import geometry as geo
from .. import goodballs as gb
from .. import lpnorms
from .. import nodal as nd
from ..errors import ConfigError, InsufficientSweepError, NodalLabError, NumericalError
from ..local import rbar as default_rbar
from ..mesh_spectrum import assemble, lowest_eigenpairs, to_field
from .config import ExperimentConfig

log = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "lambda", "r", "num_balls", "C_M", "d", "N_good", "mass_good", "vol_Gd", "nodal_total",
    "min_ball_nodal_ratio", "min_sign_volume_ratio", "mean_value_C0", "reverse_holder",
)
DETAIL_COLUMNS = (
    "lambda", "index", "a_field", "a", "n_asserted", "max_average_ratio",
    "max_average_ratio_asserted", "min_sign_mass_ratio", "min_sign_mass_ratio_asserted",
    "max_zero_offset", "min_isoperimetric_ratio", "max_rh_over_c0_2d", "sign_volume_floor",
    "norm_pcrit", "volume_floor_pcrit",
)
BALL_COLUMNS = (
    "lambda", "ball", "good", "mass_B", "mass_2B", "zero_offset", "nodal", "vol_plus",
    "vol_minus", "int_plus", "int_minus", "int_abs", "average_ratio", "C0", "reverse_holder",
)
SOBOLEV_COLUMNS = ("lambda", "set", "lhs", "rhs")
FIT_QUANTITIES = ("num_balls", "N_good", "mass_good", "vol_Gd", "nodal_total", "C_M")


class NoGoodBallsError(NumericalError):
    pass


@dataclass(eq=False)
class SweepReport:
    config: ExperimentConfig
    n: int
    a: float
    rows: list = field(default_factory=list)
    details: list = field(default_factory=list)
    balls: list = field(default_factory=list)
    sobolev: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=np.float64)

    def detail(self, name):
        return np.array([r[name] for r in self.details], dtype=np.float64)


# ---------------------------------------------------------------- setup


def build_manifold(cfg: ExperimentConfig):
    if cfg.manifold == "flat-torus":
        m = geo.flat_torus(cfg.dimension, cfg.periods)
    elif cfg.manifold == "round-sphere":
        m = geo.round_sphere()
    else:
        if cfg.mesh == "icosphere":
            v, t = geo.icosphere(cfg.subdiv)
        else:
            v, t = geo.read_off(cfg.mesh)
        m = geo.mesh_surface(v, t)
    return m, geo.build_quadrature(m, cfg.resolution)


class FieldFactory:
    """Family member by index; the mesh spectrum is solved once."""

    def __init__(self, cfg: ExperimentConfig, m, quad):
        self.cfg, self.m, self.quad = cfg, m, quad
        self._pairs = None

    def __call__(self, index: int) -> em.SampledField:
        cfg, m, quad = self.cfg, self.m, self.quad
        if cfg.family == "torus-mode":
            k = (index,) * m.n if m.n == 3 else (index,) + (0,) * (m.n - 1)
            return em.torus_mode(m, quad, k, "sin")
        if cfg.family in ("zonal", "beam"):
            return em.sphere_harmonic(m, quad, index, cfg.family)
        if self._pairs is None:
            count = (max(cfg.indices) + 1) ** 2
            self._pairs = lowest_eigenpairs(assemble(m), count, seed=cfg.seed)
        # first member of the degree-l cluster
        return to_field(self._pairs[index * index], m, quad)


# ---------------------------------------------------------------- rows


def _row(f: em.SampledField, a: float, cfg: ExperimentConfig, rb: float, rng):
    m, quad = f.manifold, f.quad
    n = m.n
    lam = f.eigenvalue
    r = cv.wavelength_radius(a, lam)
    cover = cv.build_cover(m, quad, r)
    c_m, _ = cv.overlap_multiplicity(cover, quad)
    d = cfg.d if cfg.d is not None else gb.choose_d(c_m)
    rep = gb.classify(f, cover, d)
    if m.kind == "mesh-surface":
        nodal = nd.extract_nodal(f)
    else:
        nodal = nd.extract_nodal(f, cfg.extraction_resolution)

    good = np.flatnonzero(rep.good)
    if good.size == 0:
        raise NoGoodBallsError("no good balls in the cover")
    centers = cover.centers[good]
    zeros = cv.empirical_zeros(f)
    q, zdist = cv.nearest_zeros(f, centers, zeros)
    r43 = 4.0 * r / 3.0
    st = nd.ball_stats(f, q, r43)
    nd.piece_grid(nodal, r43)
    nodal_q = nd.nodal_in_balls(nodal, q, r43)
    nodal_b = nd.nodal_in_balls(nodal, centers, r)

    rn = r**n
    int_abs = st["int_abs"]
    avg = np.abs(st["int_u"]) / int_abs
    smass = np.minimum(st["int_plus"], st["int_minus"]) / int_abs
    svol = np.minimum(st["vol_plus"], st["vol_minus"])
    c0 = st["sup_u2"] * rn / rep.mass_2b[good]
    rh = st["int_u2"] * rn / int_abs**2
    with np.errstate(divide="ignore"):
        iso = nodal_q / svol ** ((n - 1) / n)
    asserted = r43 <= rb

    p = lpnorms.critical_p(n)
    norm_p = lpnorms.lp_norm(f, p)
    row = {
        "lambda": lam,
        "r": r,
        "num_balls": len(cover),
        "C_M": c_m,
        "d": float(d),
        "N_good": rep.n_good,
        "mass_good": rep.mass_good,
        "vol_Gd": rep.vol_good,
        "nodal_total": nodal.total,
        "min_ball_nodal_ratio": float(np.min(nodal_b) / r ** (n - 1)),
        "min_sign_volume_ratio": float(np.min(svol) / rn),
        "mean_value_C0": float(np.max(c0)),
        "reverse_holder": float(np.max(rh)),
    }
    detail = {
        "lambda": lam,
        "a": a,
        "n_asserted": int(asserted),
        "max_average_ratio": float(np.max(avg)),
        "max_average_ratio_asserted": float(np.max(avg)) if asserted else math.nan,
        "min_sign_mass_ratio": float(np.min(smass)),
        "min_sign_mass_ratio_asserted": float(np.min(smass)) if asserted else math.nan,
        "max_zero_offset": float(np.max(zdist) / r),
        "min_isoperimetric_ratio": float(np.min(iso)),
        "max_rh_over_c0_2d": float(np.max(rh / (c0 * 2.0**d))),
        "sign_volume_floor": float(np.min(svol / rn * 9.0 * c0 * 2.0**d)),
        "norm_pcrit": norm_p,
        "volume_floor_pcrit": gb.volume_floor(0.75, norm_p, p),
    }
    balls = []
    gi = {int(g): j for j, g in enumerate(good)}
    for b in range(len(cover)):
        j = gi.get(b)
        rec = {
            "lambda": lam, "ball": b, "good": int(rep.good[b]),
            "mass_B": rep.mass_b[b], "mass_2B": rep.mass_2b[b],
        }
        if j is None:
            rec.update({k: math.nan for k in BALL_COLUMNS if k not in rec})
        else:
            rec.update({
                "zero_offset": zdist[j], "nodal": nodal_b[j], "vol_plus": st["vol_plus"][j],
                "vol_minus": st["vol_minus"][j], "int_plus": st["int_plus"][j],
                "int_minus": st["int_minus"][j], "int_abs": int_abs[j],
                "average_ratio": avg[j], "C0": c0[j], "reverse_holder": rh[j],
            })
        balls.append(rec)

    sob = []
    if n >= 3:
        sets = [("M", np.ones(len(quad), dtype=bool)), ("G_d", rep.good_mask)]
        for frac in (0.05, 0.2, 0.5):
            pick = rng.random(len(cover)) < frac
            sets.append((f"random_{frac}", geo.ball_mask(m, quad, cover.centers[pick], r)))
        for name, mask in sets:
            lhs, rhs = gb.sobolev_check(f, mask)
            sob.append({"lambda": lam, "set": name, "lhs": lhs, "rhs": rhs})
    return row, detail, balls, sob


def _fit_report(rows):
    fits = {}
    if len(rows) < 3:
        return fits
    for q in FIT_QUANTITIES:
        samples = [(r["lambda"], r[q]) for r in rows]
        if all(v > 0 for _, v in samples):
            fits[q] = lpnorms.loglog_fit(samples)
    return fits


def run_sweep(cfg: ExperimentConfig) -> SweepReport:
    """Rows for every family index, failures recorded per row, then fits.
    With a = auto the wavelength constant is a_margin times the largest
    measured zero-spacing scale over the family."""
    m, quad = build_manifold(cfg)
    make = FieldFactory(cfg, m, quad)
    rb = cfg.rbar if cfg.rbar is not None else default_rbar(m)
    failures = []
    a_field = {}
    for idx in cfg.indices:
        try:
            a_field[idx] = cv.zero_spacing_scale(make(idx))
        except NodalLabError as exc:
            failures.append({"index": idx, "stage": "zero_spacing", "reason": str(exc)})
    if cfg.a is not None:
        a = cfg.a
    elif a_field:
        a = cfg.a_margin * max(a_field.values())
    else:
        a = math.nan
    report = SweepReport(cfg, m.n, a, failures=failures)
    for idx in cfg.indices:
        if idx not in a_field:
            continue
        rng = np.random.default_rng([cfg.seed, idx])
        try:
            f = make(idx)
            row, detail, balls, sob = _row(f, a, cfg, rb, rng)
        except NodalLabError as exc:
            log.warning("row %s failed: %s", idx, exc)
            failures.append({"index": idx, "stage": "row", "reason": str(exc)})
            continue
        detail["index"] = idx
        detail["a_field"] = a_field[idx]
        report.rows.append(row)
        report.details.append(detail)
        report.balls.extend(balls)
        report.sobolev.extend(sob)
    order = np.argsort([r["lambda"] for r in report.rows], kind="stable")
    report.rows = [report.rows[i] for i in order]
    report.details = [report.details[i] for i in order]
    report.fits = _fit_report(report.rows)
    return report


def theorem_check(report: SweepReport, n: int | None = None):
    """(c_min, pass) with c_min = min over rows of nodal_total / lambda^((3-n)/4)."""
    if not report.rows:
        raise InsufficientSweepError("empty report")
    n = report.n if n is None else n
    e = (3.0 - n) / 4.0
    c_min = min(r["nodal_total"] / r["lambda"] ** e for r in report.rows)
    floors = all(r["min_ball_nodal_ratio"] > 0 for r in report.rows)
    return c_min, bool(c_min > 0 and floors)


# ---------------------------------------------------------------- output


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(rec[c]) for c in columns])


def write_report(report: SweepReport, out: str | None = None):
    out = out or report.config.out
    if not out:
        raise ConfigError("no output directory")
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, report.rows)
    write_csv(os.path.join(out, "details.csv"), DETAIL_COLUMNS, report.details)
    write_csv(os.path.join(out, "balls.csv"), BALL_COLUMNS, report.balls)
    if report.sobolev:
        write_csv(os.path.join(out, "sobolev.csv"), SOBOLEV_COLUMNS, report.sobolev)
    write_csv(os.path.join(out, "failures.csv"), ("index", "stage", "reason"), report.failures)
    fits = [
        {"quantity": q, "slope": f.slope, "intercept": f.intercept, "r2": f.r2,
         "rows": len(f.samples)}
        for q, f in report.fits.items()
    ]
    write_csv(os.path.join(out, "fits.csv"), ("quantity", "slope", "intercept", "r2", "rows"),
              fits)
    return out


def read_sweep_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: float(v) for k, v in rec.items()} for rec in csv.DictReader(fh)]


def fits_from_csv(path):
    """Regenerate the fits from a written sweep.csv."""
    return _fit_report(read_sweep_csv(path))
