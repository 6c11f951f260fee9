import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdde.brownian import (
    BrownianGrid,
    coarsen,
    increment_at,
    read_binary,
    refine,
    sample_path,
    sample_paths,
    select_paths,
    standard_normal_at,
    standard_normals,
    value_at,
    write_binary,
)
from sdde.errors import GridMisaligned, OffGridQuery


def test_sample_path_shape_and_determinism():
    g = sample_path(1, 1.0, 4, seed=11)
    assert g.increments.shape == (4, 1)
    again = sample_path(1, 1.0, 4, seed=11)
    assert np.array_equal(g.W, again.W)
    assert not np.array_equal(g.W, sample_path(1, 1.0, 4, seed=12).W)


def test_misaligned_grid():
    with pytest.raises(GridMisaligned):
        sample_path(1, 1.3, 4, seed=0)


def test_counter_based_access():
    # any increment is reproducible without generating its predecessors
    g = sample_path(3, 2.0, 8, seed=5, path=9)
    for step, coord in [(0, 0), (7, 2), (15, 1), (11, 0)]:
        assert increment_at(5, 9, step, coord, m=3, n=8) == pytest.approx(
            g.increments[step, coord], rel=0, abs=1e-15
        )
    z = standard_normals(77, 3, 101)
    assert [standard_normal_at(77, 3, i) for i in (0, 1, 2, 57, 100)] == [z[i] for i in (0, 1, 2, 57, 100)]


def test_batch_matches_single_paths():
    b = sample_paths(2, 1.0, 16, seed=3, paths=[4, 0, 9])
    for i, p in enumerate([4, 0, 9]):
        assert np.array_equal(b.W[i], sample_path(2, 1.0, 16, seed=3, path=p).W)
        assert np.array_equal(select_paths(b, i).W, b.W[i])
    sub = select_paths(b, slice(1, 3))
    assert sub.path == (0, 9)


def test_value_at():
    g = sample_path(2, 1.0, 8, seed=1)
    assert np.array_equal(value_at(g, 0.0), np.zeros(2))
    assert np.array_equal(value_at(g, 0.125), g.increments[0])
    assert value_at(g, 1.0) == pytest.approx(g.increments.sum(axis=0), abs=1e-14)
    with pytest.raises(OffGridQuery):
        value_at(g, 0.1)
    with pytest.raises(OffGridQuery):
        value_at(g, 1.5)


def test_coarsen_constant_increments():
    g = BrownianGrid.from_increments(np.full((8, 1), 0.25), 1.0, 8)
    c = coarsen(g, 2)
    assert c.n == 4
    assert np.array_equal(c.increments, np.full((4, 1), 0.5))
    assert value_at(c, 1.0) == value_at(g, 1.0)
    with pytest.raises(GridMisaligned):
        coarsen(g, 3)


def test_coarsen_chain_is_exact():
    g = sample_path(2, 2.0, 64, seed=8)
    a = coarsen(g, 4)
    b = coarsen(coarsen(g, 2), 2)
    assert np.array_equal(a.increments, b.increments)
    assert np.array_equal(value_at(a, 2.0), value_at(g, 2.0))
    assert a.level == 2


def test_refine_returns_to_sampled_level():
    g = sample_path(1, 1.0, 32, seed=2)
    c = coarsen(g, 8)
    assert np.array_equal(refine(c, 4).increments, coarsen(g, 2).increments)
    assert np.array_equal(refine(c, 8).increments, g.increments)
    with pytest.raises(GridMisaligned):
        refine(g, 2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63), st.sampled_from([1, 2, 4, 8]), st.integers(1, 3))
def test_coarsen_refine_roundtrip(seed, r, m):
    g = coarsen(sample_path(m, 1.0, 64, seed=seed), 8)
    back = coarsen(refine(g, r), r)
    assert np.abs(back.increments - g.increments).max() <= 1e-12
    # sums over fine blocks equal the coarse increments
    fine = refine(g, r).increments
    assert np.abs(fine.reshape(-1, r, m).sum(axis=1) - g.increments).max() <= 1e-12


def test_binary_roundtrip(tmp_path):
    g = sample_path(2, 1.0, 8, seed=2**40 + 3, path=5)
    f = tmp_path / "w.bin"
    write_binary(g, f)
    raw = f.read_bytes()
    assert len(raw) == 8 + 4 + 8 + 8 + 8 + 8 + 8 * 2 * 8
    back = read_binary(f)
    assert (back.m, back.T, back.n, back.seed, back.path) == (2, 1.0, 8, 2**40 + 3, 5)
    assert np.array_equal(back.increments, g.increments)


def test_distribution_of_endpoint():
    P = 10_000
    g = sample_paths(1, 2.0, 4, seed=123, paths=range(P))
    WT = g.W[:, -1, 0]
    assert abs(WT.mean()) < 4 * np.sqrt(2.0 / P)
    assert 0.9 <= WT.var() / 2.0 <= 1.1


def test_coordinate_independence():
    g = sample_paths(2, 1.0, 4, seed=321, paths=range(10_000))
    WT = g.W[:, -1, :]
    assert abs(np.corrcoef(WT.T)[0, 1]) < 0.05
