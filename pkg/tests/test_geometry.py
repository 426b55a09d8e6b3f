import numpy as np
import pytest
from hypothesis import given, strategies as st

from raceway2d.geometry import (build_grid, gaussian_two_bump_bed, gaussian_two_bump_slope,
                                layer_geometry)


def test_channel_grid_spacing():
    grid = build_grid(20.0, 300, 20)
    assert grid.n_cells == 300 and grid.n_layers == 20
    np.testing.assert_allclose(grid.dx, 1.0 / 15.0, rtol=1e-14)
    assert grid.cell_centers[0] == pytest.approx(1.0 / 30.0)
    assert np.all(grid.topography == 0.0)


def test_two_cell_single_layer():
    grid = build_grid(3.0, 2, 1, layer_fractions=[1.0])
    geo = layer_geometry(grid, np.array([0.7, 0.2]))
    np.testing.assert_array_equal(geo.interfaces, [[0.0, 0.0], [0.7, 0.2]])
    np.testing.assert_array_equal(geo.thicknesses, [[0.7, 0.2]])


def test_two_bump_bed_sampled():
    grid = build_grid(20.0, 300, 20, topography_function=gaussian_two_bump_bed)
    x = grid.cell_centers
    expected = 0.2 * np.exp(-(x - 8.0) ** 2) - 0.4 * np.exp(-(x - 12.0) ** 2)
    np.testing.assert_array_equal(grid.topography, expected)
    assert grid.topography.max() == pytest.approx(0.2, abs=1e-3)
    assert grid.topography.min() == pytest.approx(-0.4, abs=1e-3)


def test_bed_slope_matches_finite_difference():
    x = np.linspace(0, 20, 2001)
    step = 1e-6
    fd = (gaussian_two_bump_bed(x + step) - gaussian_two_bump_bed(x - step)) / (2 * step)
    np.testing.assert_allclose(gaussian_two_bump_slope(x), fd, atol=1e-8)


def test_symmetric_split():
    grid = build_grid(1.0, 2, 2)
    geo = layer_geometry(grid, np.ones(2))
    np.testing.assert_array_equal(geo.interfaces[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(geo.thicknesses[:, 0], [0.5, 0.5])


def test_dry_column():
    grid = build_grid(1.0, 2, 3, topography_function=lambda x: 0.1 * x)
    geo = layer_geometry(grid, np.zeros(2))
    np.testing.assert_array_equal(geo.interfaces, np.broadcast_to(grid.topography, (4, 2)))
    assert np.all(geo.thicknesses == 0)


def test_uneven_fractions():
    grid = build_grid(1.0, 2, 3, layer_fractions=[0.2, 0.3, 0.5],
                      topography_function=lambda x: np.full_like(x, 0.2))
    geo = layer_geometry(grid, np.full(2, 0.5))
    np.testing.assert_allclose(geo.interfaces[:, 0], [0.2, 0.3, 0.45, 0.7], atol=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(layer_fractions=[0.5, 0.6]),
    dict(layer_fractions=[1.2, -0.2]),
    dict(layer_fractions=[0.5]),
    dict(topography_function=lambda x: np.full_like(x, np.nan)),
])
def test_rejects_bad_grids(kwargs):
    with pytest.raises(ValueError):
        build_grid(10.0, 5, 2, **kwargs)


def test_rejects_single_cell():
    with pytest.raises(ValueError):
        build_grid(1.0, 1, 1)


fractions = st.lists(st.floats(0.05, 1.0), min_size=1, max_size=8).map(
    lambda v: np.array(v) / np.sum(v))


@given(fractions, st.lists(st.floats(0.0, 5.0), min_size=2, max_size=6))
def test_thicknesses_sum_to_height(l, H):
    H = np.array(H)
    grid = build_grid(1.0, H.size, l.size, layer_fractions=l / l.sum())
    geo = layer_geometry(grid, H)
    assert np.all(geo.thicknesses >= 0)
    np.testing.assert_allclose(geo.thicknesses.sum(axis=0), H, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(geo.interfaces[0], grid.topography)
    np.testing.assert_array_equal(geo.interfaces[-1], grid.topography + H)


@given(fractions, st.floats(0.01, 3.0), st.floats(0.001, 1.0))
def test_interfaces_monotone_in_height(l, H, dH):
    grid = build_grid(1.0, 2, l.size, layer_fractions=l / l.sum())
    low = layer_geometry(grid, np.full(2, H)).interfaces
    high = layer_geometry(grid, np.full(2, H + dH)).interfaces
    assert np.all(high[1:] > low[1:])
    np.testing.assert_array_equal(high[0], low[0])
