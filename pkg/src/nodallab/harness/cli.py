"""Command line entry point.

Every subcommand reads an experiment file (``--config``) except ``plot``,
which only reads the CSVs already written to ``--out``. Exit codes: 0 on
success, 2 on a configuration error, 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from .. import covering as cv
from .. import goodballs as gb
from .. import local as lc
from .. import lpnorms
from .. import nodal as nd
from ..errors import ConfigError, NumericalError, ResolutionError
from ..mesh_spectrum import assemble, cluster_eigenvalues, lowest_eigenpairs
from .config import load_config
from .sweep import (
    FIT_QUANTITIES, FieldFactory, build_manifold, read_sweep_csv, run_sweep, theorem_check,
    write_csv, write_report,
)

log = logging.getLogger("nodallab")

LP_EXPONENTS = (2.0, 4.0, 6.0, math.inf)


def _config(args):
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = load_config(args.config)
    return cfg.with_overrides(out=args.out, resolution=args.resolution, seed=args.seed)


def _setup(args):
    cfg = _config(args)
    m, quad = build_manifold(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    return cfg, m, quad, FieldFactory(cfg, m, quad)


def _a(cfg, f):
    return cfg.a if cfg.a is not None else cfg.a_margin * cv.zero_spacing_scale(f)


def cmd_modes(args):
    cfg, m, quad, make = _setup(args)
    names = [f"x{i}" for i in range(quad.points.shape[1])] + ["weight", "value"]
    for idx in cfg.indices:
        f = make(idx)
        recs = [dict(zip(names, (*p, w, v))) for p, w, v in zip(quad.points, quad.weights, f.values)]
        path = os.path.join(cfg.out, f"field_{idx}.csv")
        write_csv(path, names, recs)
        print(f"{path}: lambda={f.eigenvalue:.6g} points={len(recs)}")


def cmd_cover(args):
    cfg, m, quad, make = _setup(args)
    recs = []
    for idx in cfg.indices:
        f = make(idx)
        a = _a(cfg, f)
        r = cv.wavelength_radius(a, f.eigenvalue)
        cover = cv.build_cover(m, quad, r)
        c_m, _ = cv.overlap_multiplicity(cover, quad)
        counts = cv.covering_counts(cover, quad)
        recs.append({"index": idx, "lambda": f.eigenvalue, "a": a, "r": r,
                     "num_balls": len(cover), "C_M": c_m, "min_cover_count": int(counts.min())})
        print(f"index {idx}: r={r:.4g} balls={len(cover)} C_M={c_m}")
    write_csv(os.path.join(cfg.out, "cover.csv"), tuple(recs[0]), recs)


def cmd_goodballs(args):
    cfg, m, quad, make = _setup(args)
    recs = []
    for idx in cfg.indices:
        f = make(idx)
        r = cv.wavelength_radius(_a(cfg, f), f.eigenvalue)
        cover = cv.build_cover(m, quad, r)
        c_m, _ = cv.overlap_multiplicity(cover, quad)
        d = cfg.d if cfg.d is not None else gb.choose_d(c_m)
        rep = gb.classify(f, cover, d)
        recs.append({"index": idx, "lambda": f.eigenvalue, "r": r, "d": d,
                     "num_balls": len(cover), "N_good": rep.n_good,
                     "mass_good": rep.mass_good, "vol_Gd": rep.vol_good})
        print(f"index {idx}: d={d:.4g} good={rep.n_good}/{len(cover)} "
              f"mass_good={rep.mass_good:.4f}")
    write_csv(os.path.join(cfg.out, "goodballs.csv"), tuple(recs[0]), recs)


def cmd_nodal(args):
    cfg, m, quad, make = _setup(args)
    recs = []
    for idx in cfg.indices:
        f = make(idx)
        est = nd.extract_nodal(f) if m.kind == "mesh-surface" else \
            nd.extract_nodal(f, cfg.extraction_resolution)
        recs.append({"index": idx, "lambda": f.eigenvalue, "nodal_total": est.total,
                     "pieces": len(est)})
        print(f"index {idx}: lambda={f.eigenvalue:.6g} nodal={est.total:.6g}")
    write_csv(os.path.join(cfg.out, "nodal.csv"), tuple(recs[0]), recs)


def cmd_lp(args):
    cfg, m, quad, make = _setup(args)
    ps = tuple(sorted(set(LP_EXPONENTS) | {lpnorms.critical_p(m.n)}))
    names = tuple(f"L{p:g}" for p in ps)
    recs = []
    for idx in cfg.indices:
        f = make(idx)
        rec = {"index": idx, "lambda": f.eigenvalue}
        rec.update({k: lpnorms.lp_norm(f, p) for k, p in zip(names, ps)})
        recs.append(rec)
    write_csv(os.path.join(cfg.out, "lp.csv"), ("index", "lambda") + names, recs)
    if len(recs) >= 3:
        for k, p in zip(names, ps):
            fit = lpnorms.loglog_fit([(r["lambda"], r[k]) for r in recs])
            print(f"{k}: slope {fit.slope:.4f} (bound {lpnorms.sogge_exponent(m.n, p):.4f})")


def cmd_local(args):
    """Average ratio, mean-value constant and growth residual at the empirical
    zero nearest to the first quadrature point, per family member."""
    cfg, m, quad, make = _setup(args)
    rb = cfg.rbar if cfg.rbar is not None else lc.rbar(m)
    recs = []
    for idx in cfg.indices:
        f = make(idx)
        r = cv.wavelength_radius(_a(cfg, f), f.eigenvalue)
        q, _ = cv.nearest_zeros(f, quad.points[:1])
        rr = min(r, rb)
        # shells need s >= 8 grid spacings to hold their default width
        lo = max(rr / 8, 8.5 * quad.spacing)
        if lo >= rr:
            raise ResolutionError(f"radius {rr:.4g} is below the shell resolution")
        radii = np.linspace(lo, rr, 12)
        growth = lc.average_growth_residual(f, q[0], radii)
        recs.append({
            "index": idx, "lambda": f.eigenvalue, "r": rr,
            "average_ratio": lc.average_ratio(f, q[0], rr, limit=math.inf),
            "mean_value_constant": lc.mean_value_constant(f, q[0], rr),
            "growth_holds": int(growth.holds()),
            "max_growth_residual": float(np.max(growth.residual)),
        })
        print(f"index {idx}: " + " ".join(f"{k}={v:.4g}" for k, v in recs[-1].items()
                                           if isinstance(v, float)))
    write_csv(os.path.join(cfg.out, "local.csv"), tuple(recs[0]), recs)


def cmd_mesh_eig(args):
    cfg = _config(args)
    if cfg.manifold != "mesh-surface":
        raise ConfigError("mesh-eig needs manifold = mesh-surface")
    m, _ = build_manifold(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    count = (max(cfg.indices) + 1) ** 2
    pairs = lowest_eigenpairs(assemble(m), count, seed=cfg.seed)
    recs = [{"k": k, "eigenvalue": p.eigenvalue, "residual": p.residual}
            for k, p in enumerate(pairs)]
    write_csv(os.path.join(cfg.out, "mesh_eig.csv"), ("k", "eigenvalue", "residual"), recs)
    for j, cl in enumerate(cluster_eigenvalues(pairs)):
        ev = np.array([p.eigenvalue for p in cl])
        print(f"cluster {j}: size={len(cl)} mean={ev.mean():.6g}")


def cmd_sweep(args):
    cfg = _config(args)
    report = run_sweep(cfg)
    out = write_report(report)
    for fl in report.failures:
        print(f"index {fl['index']} failed at {fl['stage']}: {fl['reason']}")
    for q, fit in report.fits.items():
        print(f"{q}: slope {fit.slope:.4f} r2 {fit.r2:.4f}")
    c_min, ok = theorem_check(report)
    print(f"theorem check: c_min={c_min:.6g} {'pass' if ok else 'fail'}")
    print(f"wrote {out}")
    return 0 if ok else 3


def cmd_plot(args):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = args.out or (_config(args).out if args.config else None)
    if not out:
        raise ConfigError("plot needs --out or --config")
    path = os.path.join(out, "sweep.csv")
    if not os.path.exists(path):
        raise ConfigError(f"{path} does not exist; run the sweep first")
    rows = read_sweep_csv(path)
    lam = np.array([r["lambda"] for r in rows])
    for q in FIT_QUANTITIES:
        val = np.array([r[q] for r in rows])
        if np.any(val <= 0):
            continue
        fit = lpnorms.loglog_fit(zip(lam, val))
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(lam, val, "o", label=q)
        ax.loglog(lam, fit.predict(lam), "-", label=f"slope {fit.slope:.3f}")
        ax.set_xlabel("lambda")
        ax.set_ylabel(q)
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out, f"{q}.svg"))
        plt.close(fig)
        print(f"{q}.svg")


COMMANDS = {
    "modes": (cmd_modes, "dump each family member as CSV (coordinates, weight, value)"),
    "cover": (cmd_cover, "wavelength cover and double-ball multiplicity"),
    "goodballs": (cmd_goodballs, "good-ball counts, mass and volume"),
    "nodal": (cmd_nodal, "total nodal measure"),
    "lp": (cmd_lp, "L^p norms and their scaling"),
    "local": (cmd_local, "local estimates at an empirical zero"),
    "mesh-eig": (cmd_mesh_eig, "lowest mesh eigenpairs and clusters"),
    "sweep": (cmd_sweep, "full sweep with CSV report"),
    "plot": (cmd_plot, "SVG log-log charts from sweep.csv"),
}


def _common(default=None):
    common = argparse.ArgumentParser(add_help=False, argument_default=default)
    common.add_argument("--config", help="experiment file")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--resolution", type=int, help="quadrature resolution override")
    common.add_argument("--seed", type=int, help="seed override")
    common.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return common


def build_parser():
    """Global flags are accepted before or after the subcommand."""
    parser = argparse.ArgumentParser(prog="nodallab", parents=[_common()])
    sub = parser.add_subparsers(dest="command", required=True)
    # SUPPRESS keeps a flag given before the subcommand from being reset
    after = _common(argparse.SUPPRESS)
    for name, (_, text) in COMMANDS.items():
        sub.add_parser(name, help=text, parents=[after])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        code = func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
