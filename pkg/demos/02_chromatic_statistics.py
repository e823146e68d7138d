"""Circular hue statistics and the chromatic distance.

Hue wraps at 1.0, so its mean and deviation are computed on the circle:
two near-red images on opposite sides of the wrap point are chromatically
close, not maximally distant.
"""

import numpy as np

from qdforge import hsv_distance, hsv_summary
from qdforge.decoder import hsv_to_rgb

reddish_a = np.broadcast_to(hsv_to_rgb(0.98, 0.9, 0.8), (16, 16, 3)).copy()
reddish_b = np.broadcast_to(hsv_to_rgb(0.02, 0.9, 0.8), (16, 16, 3)).copy()

sa, sb = hsv_summary(reddish_a), hsv_summary(reddish_b)
print(f"hue means: {sa.mean_h:.3f} vs {sb.mean_h:.3f}")
print(f"naive |difference| would be {abs(sa.mean_h - sb.mean_h):.3f}; "
      f"circular distance is {min(abs(sa.mean_h - sb.mean_h), 1 - abs(sa.mean_h - sb.mean_h)):.3f}")
print(f"d_hsv(reddish_a, reddish_b) = {hsv_distance(sa, sb):.6f}  (0.04^2 / 6)")

# a two-pixel image straddling the wrap point has circular mean ~0
wrap = np.stack([hsv_to_rgb(0.95, 1.0, 1.0), hsv_to_rgb(0.05, 1.0, 1.0)]).reshape(1, 2, 3)
sw = hsv_summary(wrap)
dist_from_zero = min(sw.mean_h, 1.0 - sw.mean_h)
print(f"\nhues {{0.95, 0.05}}: circular mean sits {dist_from_zero:.2e} from hue 0 "
      f"(raw value {sw.mean_h!r}), circular std {sw.std_h:.4f}")

black = hsv_summary(np.zeros((8, 8, 3)))
white = hsv_summary(np.ones((8, 8, 3)))
print(f"\nblack vs white images: d_hsv = {hsv_distance(black, white):.6f}  (= 1/6, brightness term only)")

# the six summary statistics of a random image
gen = np.random.default_rng(7)
s = hsv_summary(gen.random((64, 64, 3)))
print(f"\nrandom image summary: mean_h={s.mean_h:.3f} std_h={s.std_h:.3f} "
      f"mean_s={s.mean_s:.3f} std_s={s.std_s:.3f} mean_b={s.mean_b:.3f} std_b={s.std_b:.3f}")
