"""
Regions and pooling
===================

Walk through the region grid on a small feature map, pool it into the
42-row matrix the aggregation head consumes, and compare the six fixed
pooling baselines on one image.
"""

import numpy as np

from darac import PoolingVariant, baseline_descriptor, darac_grid, pooled_matrix, rmac_regions
from darac.regions import extra_long_axis_steps
from darac.synthetic import SyntheticSpec, make_split
from darac.training import ToyExtractor, toy_extract

# A 16 x 12 map is landscape, so the long axis gets one extra window
# position per scale: 2 + 6 + 12 regions.
print("extra long-axis positions for 16x12:", extra_long_axis_steps(16, 12))
for r in rmac_regions(16, 12):
    print(f"  scale {r.scale_index}: x {r.x0}:{r.x1}  y {r.y0}:{r.y1}")

# Square maps need no extra positions, so each scale holds l*l windows.
print("8x8 map:", len(rmac_regions(8, 8)), "regions")

# The whole map is added as the first area, which gives 21 in total.
grid = darac_grid(16, 12)
print("areas with the global one:", len(grid))

# Feature maps from the frozen toy extractor. A 64 x 48 image is
# subsampled twice by 2, so the maps are 16 x 12.
images, names, labels = make_split(SyntheticSpec(num_classes=2, per_class=1), seed=0)
fm = toy_extract(images[0], ToyExtractor(channels=8))
print("feature maps:", fm.channels, "channels of", fm.height, "x", fm.width)

# Rows 0..20 hold per-area maxima and rows 21..41 per-area averages.
P = pooled_matrix(fm, grid)
print("pooled matrix:", P.shape)
print("  global max row:", np.round(P[0], 3))
print("  global avg row:", np.round(P[21], 3))

# The six fixed baselines differ in what they pool and whether regions
# are normalized and summed before the final normalization.
for v in PoolingVariant:
    d = baseline_descriptor(fm, v)
    print(f"  {v.value:<16} first entries {np.round(d[:3] / np.linalg.norm(d), 3)}")
