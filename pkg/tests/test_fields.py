import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geostat.errors import DimensionMismatch, DomainError, IncompatibleScheme
from geostat.fields import (
    Dataset,
    Design,
    Kind,
    SplitKind,
    SplitScheme,
    holdout_size,
    make_bivariate_design,
    make_grid,
    make_spacetime_design,
    rng_stream,
    sample_uniform_locations,
    split,
)


def test_grid_examples():
    g = make_grid(2)
    np.testing.assert_array_equal(g, [[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    g = make_grid(10)
    assert g.shape == (100, 2)
    assert len(np.unique(g, axis=0)) == 100
    assert np.all((g > 0) & (g < 1))
    with pytest.raises(DomainError):
        make_grid(1)


def test_uniform_locations():
    a = sample_uniform_locations(50, seed=9)
    b = sample_uniform_locations(50, seed=9)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_uniform_locations(50, seed=10))
    big = sample_uniform_locations(10_000, seed=1)
    assert abs(big[:, 0].mean() - 0.5) <= 0.015
    assert len(np.unique(big, axis=0)) == 10_000
    one = sample_uniform_locations(1, seed=0)
    assert one.shape == (1, 2) and np.all((one >= 0) & (one <= 1))
    with pytest.raises(DomainError):
        sample_uniform_locations(0, seed=0)


def test_streams_are_independent_by_purpose():
    a = rng_stream(5, "locations").random(4)
    b = rng_stream(5, "split:rs").random(4)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, rng_stream(5, "locations").random(4))


def test_spacetime_design():
    d = make_spacetime_design([[0.1, 0.2], [0.3, 0.4]], 2)
    np.testing.assert_array_equal(d.coords, [[0.1, 0.2], [0.3, 0.4], [0.1, 0.2], [0.3, 0.4]])
    np.testing.assert_array_equal(d.t, [0, 0, 1, 1])
    assert len(make_spacetime_design(sample_uniform_locations(1000, 0), 100)) == 100_000
    d = make_spacetime_design([[0.5, 0.5]], 1)
    assert d.kind is Kind.SPACETIME and d.t.tolist() == [0.0]


def test_design_validation():
    with pytest.raises(DomainError):
        Design(Kind.SPATIAL, [[1.5, 0.2]])
    with pytest.raises(DimensionMismatch):
        Design(Kind.SPACETIME, [[0.5, 0.2]])
    with pytest.raises(DomainError):
        Design(Kind.BIVARIATE, [[0.5, 0.2]], var=[3])
    with pytest.raises(DimensionMismatch):
        Dataset(Design(Kind.SPATIAL, [[0.5, 0.2]]), [1.0, 2.0])
    with pytest.raises(DomainError):
        Dataset(Design(Kind.SPATIAL, [[0.5, 0.2]]), [np.inf])


def test_holdout_size_rounding():
    assert holdout_size(0.1, 10) == 1
    assert holdout_size(0.1, 100_000) == 10_000
    assert holdout_size(0.1, 25_000) == 2_500
    assert holdout_size(0.25, 10) == 3  # 2.5 rounds half-up
    assert holdout_size(0.01, 10) == 1
    assert holdout_size(0.99, 10) == 9


def _st(ns=100, m=100, seed=0):
    d = make_spacetime_design(sample_uniform_locations(ns, seed), m)
    return Dataset(d, np.arange(len(d), dtype=float))


def _check_partition(s, n):
    both = np.concatenate([s.train_indices, s.test_indices])
    assert np.array_equal(np.sort(both), np.arange(n))
    assert np.all(np.diff(s.test_indices) > 0)
    assert np.all(np.diff(s.train_indices) > 0)


def test_t10_split():
    d = _st()
    s = split(d, SplitScheme("t10"), seed=0)
    assert len(s.test) == 1000
    assert s.train.design.t.max() <= 89 and s.test.design.t.min() >= 90
    _check_partition(s, len(d))


def test_rs_split_removes_whole_locations():
    d = _st(ns=100, m=20)
    s = split(d, SplitScheme(SplitKind.RS), seed=3)
    test_locs = {tuple(p) for p in s.test.design.coords}
    train_locs = {tuple(p) for p in s.train.design.coords}
    assert len(test_locs) == 10 and not test_locs & train_locs
    assert len(s.test) == 10 * 20
    _check_partition(s, len(d))


def test_rst_split():
    d = _st(ns=30, m=20)
    s = split(d, SplitScheme("RST"), seed=1)
    assert len(s.test) == 60
    _check_partition(s, len(d))


def test_bivariate_random10_keeps_pairs():
    pts = sample_uniform_locations(2_500, 4)
    d = Dataset(make_bivariate_design(pts), np.zeros(5_000))
    s = split(d, SplitScheme("random10"), seed=2)
    assert len(s.test) == 500
    keys = {}
    for p, v in zip(map(tuple, s.test.design.coords), s.test.design.var):
        keys.setdefault(p, set()).add(int(v))
    assert len(keys) == 250 and all(v == {1, 2} for v in keys.values())
    _check_partition(s, len(d))


def test_spatial_random10_ten_rows():
    d = Dataset(Design(Kind.SPATIAL, make_grid(4)[:10]), np.zeros(10))
    assert len(split(d, SplitScheme("random10"), seed=0).test) == 1


def test_incompatible_schemes():
    st_data = _st(ns=5, m=12)
    spatial = Dataset(Design(Kind.SPATIAL, make_grid(3)), np.zeros(9))
    with pytest.raises(IncompatibleScheme):
        split(st_data, SplitScheme("random10"), 0)
    with pytest.raises(IncompatibleScheme):
        split(spatial, SplitScheme("t10"), 0)
    with pytest.raises(IncompatibleScheme):
        split(_st(ns=5, m=10), SplitScheme("t10"), 0)
    with pytest.raises(DomainError):
        SplitScheme("rs", 1.0)


def test_split_deterministic():
    d = _st(ns=50, m=5)
    a = split(d, SplitScheme("rst"), 11)
    b = split(d, SplitScheme("rst"), 11)
    assert np.array_equal(a.test_indices, b.test_indices)
    assert not np.array_equal(a.test_indices, split(d, SplitScheme("rst"), 12).test_indices)


@settings(max_examples=30, deadline=None)
@given(
    ns=st.integers(2, 40),
    m=st.integers(1, 15),
    kind=st.sampled_from(["rs", "rst"]),
    frac=st.floats(0.01, 0.9),
    seed=st.integers(0, 2**63),
)
def test_split_partition_property(ns, m, kind, frac, seed):
    d = _st(ns, m, seed % 1000)
    if kind == "rst" and ns * m < 2:
        return
    s = split(d, SplitScheme(kind, frac), seed)
    _check_partition(s, len(d))
    assert 0 < len(s.test) < len(d)
