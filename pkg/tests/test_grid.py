import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coagbreak import OUTSIDE, DomainError, build_grid, locate_cell, pair_geometry
from coagbreak.grid import Grid


def test_two_decades_one_cell_each():
    g = build_grid(10.0, 1)
    assert g.size == 2
    np.testing.assert_allclose(g.edges, [0.1, 1.0, 10.0], rtol=1e-15)


def test_sixteen_cells():
    g = build_grid(100.0, 4)
    assert g.size == 16
    np.testing.assert_allclose(g.right / g.left, 10**0.25, rtol=1e-13)
    assert g.ratio == pytest.approx(10**0.25)


@pytest.mark.parametrize("n", [1.0, 0.5, float("inf")])
def test_bad_truncation(n):
    with pytest.raises(DomainError):
        build_grid(n, 4)


def test_pivots_are_geometric_means():
    g = build_grid(1000.0, 8)
    np.testing.assert_allclose(g.x, np.sqrt(g.left * g.right), rtol=1e-15)
    assert g.edges[0] == 1e-3 and g.edges[-1] == 1000.0


@pytest.mark.parametrize("mu,cell", [(0.5, 0), (1.0, 1), (9.99, 1), (10.0, OUTSIDE), (0.05, OUTSIDE)])
def test_locate(mu, cell):
    assert locate_cell(build_grid(10.0, 1), mu) == cell


def test_locate_rejects_nonpositive():
    with pytest.raises(DomainError):
        locate_cell(build_grid(10.0, 1), 0.0)


grids = st.builds(build_grid, st.floats(1.5, 1e4), st.integers(1, 12))


@settings(max_examples=60, deadline=None)
@given(grids)
def test_partition_covers_domain(g):
    assert np.all(np.diff(g.edges) > 0)
    assert g.widths.sum() == pytest.approx(g.n - 1 / g.n, rel=1e-12)
    assert np.all((g.left < g.x) & (g.x < g.right))


@settings(max_examples=60, deadline=None)
@given(grids)
def test_locate_round_trip(g):
    assert np.array_equal(locate_cell(g, g.x), np.arange(g.size))
    assert np.array_equal(locate_cell(g, g.left), np.arange(g.size))


@settings(max_examples=40, deadline=None)
@given(grids)
def test_split_conserves_number_and_mass(g):
    pm = pair_geometry(g)
    x = g.x
    ii, jj = np.nonzero(pm.active)
    lo = pm.lower[ii, jj]
    w = pm.weight[ii, jj]
    hi = np.minimum(lo + 1, g.size - 1)
    assert np.all((w >= 0) & (w <= 1))
    np.testing.assert_allclose(w * x[lo] + (1 - w) * x[hi], x[ii] + x[jj], rtol=1e-12)
    assert np.all(pm.sums[pm.active] < g.n)
    assert np.array_equal(pm.active, pm.active.T)


def _toy(pivots):
    # hand-placed pivots inside fixed cells [0.5, 1.5), ..., [3.5, 4.5)
    edges = np.array([0.5, 1.5, 2.5, 3.5, 4.5])
    return Grid(4.5, 1, edges, np.asarray(pivots, dtype=float), np.diff(edges))


def test_on_pivot_sum_has_unit_weight():
    pm = pair_geometry(_toy([1.0, 2.0, 3.0, 4.0]))
    assert pm.lower[0, 1] == 2 and pm.weight[0, 1] == 1.0
    assert pm.lower[0, 0] == 1 and pm.weight[0, 0] == 1.0


def test_midway_sum_splits_evenly():
    pm = pair_geometry(_toy([1.0, 2.0, 2.5, 3.5]))
    # 1 + 2 = 3 sits halfway between 2.5 and 3.5
    assert pm.lower[0, 1] == 2 and pm.weight[0, 1] == pytest.approx(0.5)


def test_large_sums_excluded():
    g = build_grid(10.0, 2)
    pm = pair_geometry(g)
    assert not pm.active[-1, -1]
    assert not np.any(pm.active & (pm.sums >= g.n))
