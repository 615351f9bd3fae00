"""Flat key = value experiment files.

One ``[experiment]`` section (the header may be omitted). Keys:

  manifold          flat-torus | round-sphere | mesh-surface
  dimension         torus dimension, 2 or 3 (torus only)
  periods           comma list, default 2*pi per axis (torus only)
  mesh              icosphere or a path to an OFF file (mesh only)
  subdiv            icosphere subdivision level (mesh = icosphere)
  family            torus-mode | zonal | beam | mesh-eig
  indices           comma list and/or ranges ``lo..hi`` (inclusive)
  resolution        quadrature resolution, >= 64 (analytic manifolds)
  nodal_resolution  extraction resolution, default = resolution
  d                 auto | number > 1
  a                 auto | number > 0
  a_margin          factor on the family-wide zero spacing when a = auto, default 1.1
  rbar              scale for the average-ratio assertion, default 0.2 x injectivity scale
  out               output directory
  seed              unsigned integer

Unknown keys and missing required keys are configuration errors.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace

from ..errors import ConfigError

MANIFOLDS = ("flat-torus", "round-sphere", "mesh-surface")
FAMILIES = {
    "torus-mode": ("flat-torus",),
    "zonal": ("round-sphere",),
    "beam": ("round-sphere",),
    "mesh-eig": ("mesh-surface",),
}
KNOWN = {
    "manifold", "dimension", "periods", "mesh", "subdiv", "family", "indices", "resolution",
    "nodal_resolution", "d", "a", "a_margin", "rbar", "out", "seed",
}


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: str
    family: str
    indices: tuple
    resolution: int
    out: str
    seed: int
    d: float | None = None
    a: float | None = None
    a_margin: float = 1.1
    dimension: int = 2
    periods: tuple | None = None
    mesh: str | None = None
    subdiv: int | None = None
    nodal_resolution: int | None = None
    rbar: float | None = None

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        validate(cfg)
        return cfg

    @property
    def extraction_resolution(self) -> int:
        return self.nodal_resolution or self.resolution


def parse_indices(text: str) -> tuple:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = (int(x) for x in part.split(".."))
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad index entry {part!r}") from exc
    if not out:
        raise ConfigError("index range is empty")
    return tuple(sorted(set(out)))


def _number(key, text, kind=float):
    try:
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {text!r}") from exc


def validate(cfg: ExperimentConfig):
    if cfg.manifold not in MANIFOLDS:
        raise ConfigError(f"unknown manifold {cfg.manifold!r}")
    if cfg.family not in FAMILIES:
        raise ConfigError(f"unknown family {cfg.family!r}")
    if cfg.manifold not in FAMILIES[cfg.family]:
        raise ConfigError(f"family {cfg.family} does not live on {cfg.manifold}")
    if not cfg.indices:
        raise ConfigError("index range is empty")
    if cfg.manifold != "mesh-surface" and cfg.resolution < 64:
        raise ConfigError("resolution must be >= 64")
    if cfg.nodal_resolution is not None and cfg.nodal_resolution < 64:
        raise ConfigError("nodal_resolution must be >= 64")
    if cfg.manifold == "flat-torus" and cfg.dimension not in (2, 3):
        raise ConfigError("torus dimension must be 2 or 3")
    if cfg.manifold == "mesh-surface":
        if not cfg.mesh:
            raise ConfigError("mesh-surface needs a mesh key")
        if cfg.mesh == "icosphere" and cfg.subdiv is None:
            raise ConfigError("icosphere needs subdiv")
    if cfg.d is not None and not cfg.d > 1:
        raise ConfigError("d must exceed 1")
    if cfg.a is not None and not cfg.a > 0:
        raise ConfigError("a must be positive")
    if not cfg.a_margin >= 1:
        raise ConfigError("a_margin must be >= 1")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")
    if cfg.family == "torus-mode" and min(cfg.indices) < 1:
        raise ConfigError("torus-mode indices must be >= 1")
    if cfg.family in ("zonal", "beam", "mesh-eig") and min(cfg.indices) < 1:
        raise ConfigError("harmonic degrees must be >= 1")


def parse_config(text: str) -> ExperimentConfig:
    if not any(line.lstrip().startswith("[") for line in text.splitlines()):
        text = "[experiment]\n" + text
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if cp.sections() != ["experiment"]:
        raise ConfigError("expected a single [experiment] section")
    raw = dict(cp["experiment"])
    unknown = set(raw) - KNOWN
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    needed = ["manifold", "family", "indices", "out", "seed"]
    if raw.get("manifold") != "mesh-surface":
        needed.append("resolution")
    missing = [k for k in needed if k not in raw]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")

    def auto_or(key):
        v = raw.get(key, "auto").strip()
        return None if v == "auto" else _number(key, v)

    periods = None
    if "periods" in raw:
        periods = tuple(_number("periods", x) for x in raw["periods"].split(","))
    cfg = ExperimentConfig(
        manifold=raw["manifold"].strip(),
        family=raw["family"].strip(),
        indices=parse_indices(raw["indices"]),
        resolution=_number("resolution", raw.get("resolution", "64"), int),
        out=raw["out"].strip(),
        seed=_number("seed", raw["seed"], int),
        d=auto_or("d"),
        a=auto_or("a"),
        a_margin=_number("a_margin", raw.get("a_margin", "1.1")),
        dimension=_number("dimension", raw.get("dimension", "2"), int),
        periods=periods,
        mesh=raw.get("mesh"),
        subdiv=_number("subdiv", raw["subdiv"], int) if "subdiv" in raw else None,
        nodal_resolution=(
            _number("nodal_resolution", raw["nodal_resolution"], int)
            if "nodal_resolution" in raw else None
        ),
        rbar=_number("rbar", raw["rbar"]) if "rbar" in raw else None,
    )
    if periods is not None and len(periods) != cfg.dimension:
        raise ConfigError("periods must list one value per dimension")
    if periods is not None and any(not (p > 0 and math.isfinite(p)) for p in periods):
        raise ConfigError("periods must be positive")
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
