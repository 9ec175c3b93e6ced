import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from darac import DimensionError, Region, rmac_regions, with_global
from darac.regions import darac_grid, extra_long_axis_steps, format_grid


def boxes(regions):
    return [(r.scale_index, r.x0, r.y0, r.x1, r.y1) for r in regions]


# Hand placements: side 2 min(W, H) / (l + 1), first/last window flush with
# the borders, starts floored and ends ceiled.
EXPECTED_8x8 = (
    [(1, 0, 0, 8, 8)]
    # side 16/3, starts 0 and 8/3 -> spans [0, 6) and [2, 8)
    + [(2, x0, y0, x1, y1) for (y0, y1) in [(0, 6), (2, 8)] for (x0, x1) in [(0, 6), (2, 8)]]
    # side 4, stride 2
    + [(3, x0, y0, x0 + 4, y0 + 4) for y0 in (0, 2, 4) for x0 in (0, 2, 4)]
)

EXPECTED_16x12 = (
    # side 12, two positions along x (d = 1)
    [(1, 0, 0, 12, 12), (1, 4, 0, 16, 12)]
    # side 8: three along x (stride 4), two along y (stride 4)
    + [(2, x0, y0, x0 + 8, y0 + 8) for y0 in (0, 4) for x0 in (0, 4, 8)]
    # side 6: four along x (stride 10/3), three along y (stride 3)
    + [(3, x0, y0, x1, y0 + 6) for y0 in (0, 3, 6) for (x0, x1) in [(0, 6), (3, 10), (6, 13), (10, 16)]]
)


def test_square_8x8_matches_hand_enumeration():
    regions = rmac_regions(8, 8)
    assert len(regions) == 14
    assert boxes(regions) == EXPECTED_8x8


def test_landscape_16x12_gives_twenty():
    regions = rmac_regions(16, 12)
    assert len(regions) == 20
    assert boxes(regions) == EXPECTED_16x12
    assert extra_long_axis_steps(16, 12) == 1


def test_single_cell_map():
    regions = rmac_regions(1, 1)
    assert len(regions) == 3
    assert all((r.x0, r.y0, r.x1, r.y1) == (0, 0, 1, 1) for r in regions)


def test_portrait_mirrors_landscape():
    land = rmac_regions(16, 12)
    port = rmac_regions(12, 16)
    assert sorted((r.scale_index, r.y0, r.x0, r.y1, r.x1) for r in port) == sorted(
        (r.scale_index, r.x0, r.y0, r.x1, r.y1) for r in land
    )


@pytest.mark.parametrize("W,H", [(0, 4), (4, 0), (-1, 3)])
def test_bad_dimensions(W, H):
    with pytest.raises(DimensionError):
        rmac_regions(W, H)


def test_with_global():
    grid = with_global(rmac_regions(16, 12), 16, 12)
    assert len(grid) == 21
    g = grid[0]
    assert (g.scale_index, g.x0, g.y0, g.x1, g.y1) == (0, 0, 0, 16, 12)
    assert len(with_global(rmac_regions(8, 8), 8, 8)) == 15
    only = with_global([], 4, 4)
    assert len(only) == 1


def test_with_global_rejects_out_of_bounds():
    with pytest.raises(DimensionError):
        with_global([Region(0, 0, 5, 3, 1)], 4, 4)


def test_grid_ordering():
    grid = darac_grid(16, 12)
    keys = [(r.scale_index, r.y0, r.x0) for r in grid.regions[1:]]
    assert keys == sorted(keys)


def test_format_grid_lines():
    lines = format_grid(darac_grid(16, 12)).splitlines()
    assert lines[0] == "0 0 0 16 12"
    assert lines[1] == "1 0 0 12 12"
    assert len(lines) == 21


sizes = st.tuples(st.integers(1, 40), st.integers(1, 40)).filter(lambda wh: max(wh) <= 3 * min(wh))


@given(sizes)
def test_every_scale_covers_the_map(wh):
    W, H = wh
    regions = rmac_regions(W, H)
    for l in (1, 2, 3):
        mark = np.zeros((H, W), dtype=bool)
        for r in regions:
            assert 0 <= r.x0 < r.x1 <= W and 0 <= r.y0 < r.y1 <= H
            if r.scale_index == l:
                mark[r.y0:r.y1, r.x0:r.x1] = True
        assert mark.all()


@given(sizes)
def test_cell_extent_tracks_window_side(wh):
    # rounding outward can add at most one cell to the continuous side
    W, H = wh
    for r in rmac_regions(W, H):
        side = 2.0 * min(W, H) / (r.scale_index + 1)
        for extent, length in ((r.width, W), (r.height, H)):
            assert min(math.floor(side), length) <= extent <= math.ceil(side) + 1


@given(sizes)
def test_deterministic(wh):
    assert rmac_regions(*wh) == rmac_regions(*wh)


@given(st.integers(3, 60))
def test_square_maps_have_l_squared_per_scale(s):
    regions = rmac_regions(s, s)
    for l in (1, 2, 3):
        assert sum(r.scale_index == l for r in regions) == l * l
