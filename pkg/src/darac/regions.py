"""Multi-scale R-MAC region grid over a feature map, plus the global region."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DimensionError

# slack for floor/ceil on positions built from float strides
_SNAP = 1e-9


@dataclass(frozen=True)
class Region:
    """Half-open cell rectangle ``[x0, x1) x [y0, y1)``.

    ``scale_index`` is 0 for the global region and ``l`` for R-MAC scale ``l``.
    """

    x0: int
    y0: int
    x1: int
    y1: int
    scale_index: int = 0

    @property
    def sort_key(self) -> tuple[int, int, int, int, int]:
        return (self.scale_index, self.y0, self.x0, self.y1, self.x1)

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def check_within(self, W: int, H: int) -> None:
        if not (0 <= self.x0 < self.x1 <= W and 0 <= self.y0 < self.y1 <= H):
            raise DimensionError(f"region {self} lies outside a {W}x{H} map")


@dataclass(frozen=True)
class RegionGrid:
    regions: tuple[Region, ...]
    width: int
    height: int

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __getitem__(self, i):
        return self.regions[i]


def _overlap_fraction(side: float, long: float, positions: int) -> float:
    stride = (long - side) / (positions - 1)
    return (side - stride) / side


def extra_long_axis_steps(W: int, H: int, target_overlap: float = 0.4) -> int:
    """Number of additional window positions along the longer axis.

    Picked so that scale-1 windows (side ``min(W, H)``) overlap by a
    fraction as close as possible to ``target_overlap``; ties go to the
    smaller count. Square maps need no extra positions.
    """
    short, long = min(W, H), max(W, H)
    if long == short:
        return 0
    errs = [abs(_overlap_fraction(short, long, 1 + d) - target_overlap) for d in range(1, 6)]
    return 1 + errs.index(min(errs))


def _axis_spans(length: int, side: float, positions: int) -> list[tuple[int, int]]:
    if positions == 1:
        starts = [0.0]
    else:
        stride = (length - side) / (positions - 1)
        starts = [i * stride for i in range(positions)]
    spans = []
    for s in starts:
        a = max(0, math.floor(s + _SNAP))
        b = min(length, math.ceil(s + side - _SNAP))
        if b - a < 1:
            if a >= length:
                a = length - 1
            b = a + 1
        spans.append((a, b))
    return spans


def rmac_regions(W: int, H: int, num_scales: int = 3, target_overlap: float = 0.4) -> list[Region]:
    """Square sliding-window regions for scales ``1..num_scales``.

    At scale ``l`` the window side is ``2 min(W, H) / (l + 1)``; ``l``
    windows are placed along the shorter axis and ``l + d`` along the longer
    one (see :func:`extra_long_axis_steps`), evenly spaced and flush with
    both borders. Continuous coordinates are floored (starts) and ceiled
    (ends) to whole cells. Windows that collapse onto an identical cell
    rectangle on tiny maps are kept once.

    The result is ordered by ``(scale, y0, x0)``.
    """
    if W < 1 or H < 1:
        raise DimensionError(f"map size must be positive, got {W}x{H}")
    if num_scales < 1:
        raise DimensionError(f"num_scales must be >= 1, got {num_scales}")
    d = extra_long_axis_steps(W, H, target_overlap)
    short = min(W, H)
    out: list[Region] = []
    for l in range(1, num_scales + 1):
        side = 2.0 * short / (l + 1)
        nx = l + d if W > H else l
        ny = l + d if H > W else l
        xs = _axis_spans(W, side, nx)
        ys = _axis_spans(H, side, ny)
        scale = {Region(x0, y0, x1, y1, l) for (y0, y1) in ys for (x0, x1) in xs}
        out.extend(sorted(scale, key=lambda r: r.sort_key))
    return out


def with_global(regions: list[Region], W: int, H: int) -> RegionGrid:
    """Prepend the whole-map region to ``regions``."""
    if W < 1 or H < 1:
        raise DimensionError(f"map size must be positive, got {W}x{H}")
    for r in regions:
        r.check_within(W, H)
    glob = Region(0, 0, W, H, 0)
    return RegionGrid((glob, *regions), W, H)


def darac_grid(W: int, H: int) -> RegionGrid:
    """Global region followed by the three-scale R-MAC grid."""
    return with_global(rmac_regions(W, H), W, H)


def format_grid(grid: RegionGrid) -> str:
    """One ``scale x0 y0 x1 y1`` line per region."""
    return "\n".join(f"{r.scale_index} {r.x0} {r.y0} {r.x1} {r.y1}" for r in grid)
