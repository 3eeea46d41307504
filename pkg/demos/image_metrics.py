"""
PSNR, SSIM and keypoint distance
================================
"""

import numpy as np

from nvs4d.epipolar import MatchSet
from nvs4d.imgmetrics import keypoint_distance, psnr, ssim

rng = np.random.default_rng(2)
yy, xx = np.mgrid[0:64, 0:64] / 64.0
img = np.stack([0.5 + 0.4 * np.sin(6 * xx + 3 * yy), xx, yy], axis=-1)

for sigma in (0.01, 0.05, 0.2):
    noisy = np.clip(img + sigma * rng.normal(size=img.shape), 0, 1)
    print(f"noise {sigma}: PSNR {psnr(img, noisy):.2f} dB  SSIM {ssim(img, noisy):.4f}")

# KD: mean displacement of matched keypoints.  A model that copies the input
# frame produces matches that do not move at all.
x = rng.uniform(0, 64, size=(30, 2))
moving = [MatchSet((i, i + 1), np.hstack([x, x + [3.0, 4.0]])) for i in range(4)]
copied = [MatchSet((i, i + 1), np.hstack([x, x])) for i in range(4)]
print("KD moving:", keypoint_distance(moving).value)
print("KD copied:", keypoint_distance(copied).value)
