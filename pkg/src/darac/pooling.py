"""Regional max/average pooling and the six baseline aggregation variants."""

from __future__ import annotations

import enum

import numpy as np

from .errors import DimensionError
from .postprocess import l2_normalize
from .regions import Region, RegionGrid, rmac_regions
from .tensors import FeatureMapSet


class PoolingVariant(enum.Enum):
    AVG_GLOBAL = "avg-global"
    MAX_GLOBAL = "max-global"
    AVG_MAX_GLOBAL = "avgmax-global"
    AVG_REGIONAL = "avg-regional"
    MAX_REGIONAL = "max-regional"
    AVG_MAX_REGIONAL = "avgmax-regional"

    @property
    def is_regional(self) -> bool:
        return self.name.endswith("REGIONAL")


def pool_region(fm: FeatureMapSet, region: Region, mode: str) -> np.ndarray:
    """Per-channel max or mean over the cells of ``region``."""
    region.check_within(fm.width, fm.height)
    block = fm.data[:, region.y0:region.y1, region.x0:region.x1]
    if mode == "max":
        return block.max(axis=(1, 2))
    if mode == "avg":
        return block.mean(axis=(1, 2))
    raise ValueError(f"mode must be 'max' or 'avg', got {mode!r}")


def pooled_matrix(fm: FeatureMapSet, grid: RegionGrid) -> np.ndarray:
    """Stack max-pooled rows for every region, then avg-pooled rows.

    Returns a ``(2 R, C)`` array: rows ``0..R-1`` hold per-region maxima in
    grid order and rows ``R..2R-1`` the matching means.
    """
    if (grid.width, grid.height) != (fm.width, fm.height):
        raise DimensionError(
            f"grid built for {grid.width}x{grid.height}, map is {fm.width}x{fm.height}"
        )
    R = len(grid)
    out = np.empty((2 * R, fm.channels))
    for i, region in enumerate(grid):
        out[i] = pool_region(fm, region, "max")
        out[R + i] = pool_region(fm, region, "avg")
    return out


def _sum_normalized(vectors) -> np.ndarray:
    return l2_normalize(np.sum([l2_normalize(v) for v in vectors], axis=0))


def baseline_descriptor(fm: FeatureMapSet, variant: PoolingVariant | str) -> np.ndarray:
    """Training-free descriptor for one of the six pooling variants.

    Global variants return the raw pooled vector (``AVG_MAX_GLOBAL`` is the
    elementwise sum of the max and mean vectors). Regional variants pool
    over the R-MAC grid without the global region, L2-normalize each
    regional vector, sum them and L2-normalize the sum.
    """
    variant = PoolingVariant(variant)
    if not variant.is_regional:
        whole = Region(0, 0, fm.width, fm.height)
        if variant is PoolingVariant.AVG_GLOBAL:
            return pool_region(fm, whole, "avg")
        if variant is PoolingVariant.MAX_GLOBAL:
            return pool_region(fm, whole, "max")
        return pool_region(fm, whole, "max") + pool_region(fm, whole, "avg")

    regions = rmac_regions(fm.width, fm.height)
    modes = {
        PoolingVariant.AVG_REGIONAL: ("avg",),
        PoolingVariant.MAX_REGIONAL: ("max",),
        PoolingVariant.AVG_MAX_REGIONAL: ("max", "avg"),
    }[variant]
    return _sum_normalized(pool_region(fm, r, m) for m in modes for r in regions)
