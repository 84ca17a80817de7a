import os

import numpy as np
import pytest

from geostat import io
from geostat.errors import DimensionMismatch, DomainError
from geostat.fields import Dataset, Design, Kind, make_bivariate_design, make_spacetime_design


def designs():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (7, 2))
    return [Design(Kind.SPATIAL, pts), make_spacetime_design(pts[:3], 4), make_bivariate_design(pts)]


@pytest.mark.parametrize("design", designs(), ids=["spatial", "spacetime", "bivariate"])
def test_dataset_round_trip_is_lossless(tmp_path, design):
    z = np.random.default_rng(1).standard_normal(len(design)) * 1e-3 + 1 / 3
    path = tmp_path / "d.csv"
    io.write_dataset(path, Dataset(design, z))
    back = io.read_dataset(path)
    assert back.design.kind is design.kind
    assert np.array_equal(back.design.coords, design.coords)
    assert np.array_equal(back.values, z)
    if design.kind is Kind.SPACETIME:
        assert np.array_equal(back.design.t, design.t)
    if design.kind is Kind.BIVARIATE:
        assert np.array_equal(back.design.var, design.var)
    io.write_dataset(tmp_path / "again.csv", back)
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_headers_and_columns(tmp_path):
    d = make_bivariate_design([[0.5, 0.25]])
    io.write_predictions(tmp_path / "p.csv", d, [1.0, 2.0], [0.1, 0.2])
    assert (tmp_path / "p.csv").read_text() == "x,y,var,zhat,kvar\n0.5,0.25,1,1.0,0.1\n0.5,0.25,2,2.0,0.2\n"
    io.write_targets(tmp_path / "t.csv", d)
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "x,y,var"
    with pytest.raises(DimensionMismatch):
        io.write_predictions(tmp_path / "bad.csv", d, [1.0], [0.1])


def test_sidecar_metadata(tmp_path):
    path = tmp_path / "d.csv"
    io.write_dataset(path, Dataset(Design(Kind.SPATIAL, [[0.1, 0.2]]), [1.0]))
    io.write_kv(io.sidecar(path), {"scheme": "random10", "n": 1, "a": 0.1})
    assert io.read_dataset(path).metadata == {"scheme": "random10", "n": "1", "a": "0.1"}
    assert io.read_dataset(path, metadata={}).metadata == {}


def test_read_errors(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("")
    with pytest.raises(DomainError):
        io.read_table(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DomainError):
        io.read_table(p)
    p.write_text("x,y,z\n1,2\n")
    with pytest.raises(DimensionMismatch):
        io.read_table(p)
    p.write_text("x,y,z\n1,2,oops\n")
    with pytest.raises(DomainError):
        io.read_table(p)
    p.write_text("x,y,zhat\n1,2,3\n")
    with pytest.raises(DomainError):
        io.read_dataset(p)


def test_parse_kv():
    text = "# comment\nseed = 4\n\nmodel = matern:sigma2=1,range=0.1  # trailing\nempty =\n"
    assert io.parse_kv(text) == {"seed": "4", "model": "matern:sigma2=1,range=0.1", "empty": ""}
    for bad in ["novalue\n", "= 3\n"]:
        with pytest.raises(DomainError):
            io.parse_kv(bad)
    items = {"a": 0.1 + 0.2, "b": "x", "c": 3}
    assert io.parse_kv(io.kv_text(items)) == {"a": repr(0.1 + 0.2), "b": "x", "c": "3"}


def test_atomic_write_leaves_no_temporaries(tmp_path):
    path = tmp_path / "sub" / "out.txt"
    io.atomic_write(path, "one\n")
    io.atomic_write(path, "two\n")
    assert path.read_text() == "two\n"
    assert os.listdir(path.parent) == ["out.txt"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    path = tmp_path / "out.txt"
    io.atomic_write(path, "old\n")
    with pytest.raises(TypeError):
        io.atomic_write(path, None)
    assert path.read_text() == "old\n"
    assert os.listdir(tmp_path) == ["out.txt"]
