import pytest

from nodallab.errors import ConfigError
from nodallab.harness.config import load_config, parse_config, parse_indices

BASE = """[experiment]
manifold = flat-torus
dimension = 2
family = torus-mode
indices = 4,8..10
resolution = 128
out = /tmp/x
seed = 3
"""


def test_parse_basic():
    cfg = parse_config(BASE)
    assert cfg.indices == (4, 8, 9, 10)
    assert cfg.d is None and cfg.a is None
    assert cfg.a_margin == 1.1
    assert cfg.extraction_resolution == 128
    assert parse_config(BASE.replace("[experiment]\n", "")) == cfg


def test_explicit_policies():
    cfg = parse_config(BASE + "d = 6\na = 4.5\nnodal_resolution = 256\n")
    assert (cfg.d, cfg.a, cfg.extraction_resolution) == (6.0, 4.5, 256)


@pytest.mark.parametrize("text", [
    BASE.replace("indices = 4,8..10", "indices = 5..2"),
    BASE.replace("indices = 4,8..10", "indices = ,"),
    BASE + "colour = red\n",
    BASE.replace("seed = 3\n", ""),
    BASE.replace("resolution = 128", "resolution = 32"),
    BASE.replace("family = torus-mode", "family = zonal"),
    BASE.replace("family = torus-mode", "family = waves"),
    BASE + "d = 0.5\n",
    BASE + "a = -1\n",
    BASE + "periods = 1,2,3\n",
    BASE.replace("dimension = 2", "dimension = 4"),
    BASE.replace("seed = 3", "seed = -1"),
    BASE + "[other]\nx = 1\n",
    "manifold = mesh-surface\nfamily = mesh-eig\nindices = 1\nout = o\nseed = 0\n",
    BASE.replace("resolution = 128", "resolution = many"),
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_mesh_config_without_resolution():
    cfg = parse_config("manifold = mesh-surface\nmesh = icosphere\nsubdiv = 3\n"
                       "family = mesh-eig\nindices = 1..3\nout = o\nseed = 0\n")
    assert cfg.subdiv == 3


def test_overrides_are_validated():
    cfg = parse_config(BASE)
    assert cfg.with_overrides(resolution=256, out=None).resolution == 256
    with pytest.raises(ConfigError):
        cfg.with_overrides(resolution=16)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_parse_indices():
    assert parse_indices("3, 1..2") == (1, 2, 3)


def test_leading_comment_before_header():
    assert parse_config("# note\n" + BASE) == parse_config(BASE)
