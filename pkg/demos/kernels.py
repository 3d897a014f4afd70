"""Savitzky-Golay derivative kernels on square and irregular neighborhoods.

Run: python3 demos/kernels.py
"""
import numpy as np

from sgrecon import build_domain, knn_pixels, sg_kernel
from sgrecon.sgfilter import format_kernel, square_offsets

# A 3x3 quadratic fit reproduces the familiar Prewitt-like derivative.
k = sg_kernel(square_offsets(3), 2, "deriv_u")
print("3x3, order 2, d/du:")
print(np.round(k.as_grid(), 3))

# Near the mask border the nearest pixels form an irregular neighborhood,
# and the kernel becomes one-sided.
mask = np.ones((9, 9), bool)
mask[:, 5:] = False
nb = knn_pixels(build_domain(mask), (4, 4), 25)
k = sg_kernel(nb.offsets, 3, "deriv_u")
print("\n25 nearest pixels at the right border, order 3, d/du:")
print(format_kernel(k))

# Exactness check: the kernel returns the true derivative of a cubic.
du, dv = nb.offsets[:, 0].astype(float), nb.offsets[:, 1].astype(float)
samples = 2 + 0.5 * du - dv + du ** 3 - 0.25 * du * dv ** 2
print("\nd/du of the cubic at the center: exact 0.5, kernel", round(k.apply(samples), 12))
