"""Core numeric containers: feature map stacks and the seeded random source."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class FeatureMapSet:
    """A C x H x W stack of non-negative activations (channel-major).

    ``data`` is stored as a read-only float64 array so instances can be
    shared freely.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise DimensionError(f"feature maps must be a non-empty C x H x W array, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("feature maps contain non-finite values")
        if np.any(arr < 0):
            raise DomainError("feature maps must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def values(self) -> list[float]:
        """Flatten back to the channel-major, row-major value list."""
        return self.data.ravel().tolist()


def new_feature_maps(C: int, H: int, W: int, values: Sequence[float]) -> FeatureMapSet:
    """Build a feature map set from a flat channel-major value list."""
    if C < 1 or H < 1 or W < 1:
        raise DimensionError(f"dimensions must be positive, got C={C} H={H} W={W}")
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size != C * H * W:
        raise DimensionError(f"expected {C * H * W} values for {C}x{H}x{W}, got {flat.size}")
    return FeatureMapSet(flat.reshape(C, H, W))


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (PCG64) for a 64-bit unsigned seed.

    PCG64 streams are fixed by numpy across platforms, so equal seeds give
    equal draws everywhere.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))
