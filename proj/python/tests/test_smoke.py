import math

import pytest

import peierls_lab as pl

FREE = {
    "model": {"potential": [], "backend": {"kind": "grid", "n_s": 3}, "m_cells": 8},
    "family": {"k0": 1, "n": 2},
    "frame": {"window": 0, "hopping_radius": 1},
    "field": {"epsilons": []},
    "run": {"commands": ["bands", "butterfly"], "butterfly_cells": 8, "butterfly_flux_points": 4},
}


def test_version():
    assert pl.version().startswith("0.1.0")


def test_hash_ignores_key_order():
    flipped = dict(reversed(list(FREE.items())))
    assert pl.config_hash(FREE) == pl.config_hash(flipped)
    assert len(pl.config_hash(FREE)) == 16


def test_bad_config_raises():
    bad = dict(FREE, model=dict(FREE["model"], bogus=1))
    with pytest.raises(ValueError):
        pl.config_hash(bad)
    with pytest.raises(pl.ConfigError):
        pl.run("nope", FREE, "unused")


def test_bands_and_butterfly(tmp_path):
    assert pl.run("bands", FREE, tmp_path)["rows"] == 256
    assert (tmp_path / "bands.csv").exists()
    assert pl.run("butterfly", FREE, tmp_path)["rows"] == 4 * 64


def test_harper_zero_flux():
    rows = pl.harper_butterfly(4, 2)
    zero = sorted(e for f, e, _ in rows if f == 0.0)
    expect = sorted(2 * math.cos(math.pi * j / 2) + 2 * math.cos(math.pi * k / 2) for j in range(4) for k in range(4))
    assert zero == pytest.approx(expect, abs=1e-12)


def test_spectral_distance():
    assert pl.spectral_distance([1.0, 2.0], [1.1, 2.0], 0.0, 3.0) == pytest.approx(0.1)
    assert pl.spectral_distance([1.0], [2.0], 3.0, 4.0) is None
