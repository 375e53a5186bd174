"""Compute the three regime limits of the homogenized density.

For the pure-convolution density every regime has a closed form, so
each numerical value can be checked on the spot:

    delta fixed   theta(delta, r) * J
    delta -> 0    4 r * J    (after vertical relaxation)
    delta -> inf  4 * J      (planar trace)

with J the p-moment of the unit-slope affine field over the ball.
"""

import numpy as np

from nlthin import (
    cell_formula_delta,
    cell_formula_infinity,
    cell_formula_zero,
    oracle_pure_conv,
    pure_convolution,
)

M = np.eye(1)
density = pure_convolution(2.0, 2.0)

est = cell_formula_delta(pure_convolution(1.0, 2.0), 1.0, M,
                         resolutions=(8, 16))
exact = oracle_pure_conv(M, 1.0, 2.0, "delta", delta=1.0)
print(f"delta = 1 : {est.value:.5f}  (exact {exact:.5f}, "
      f"ladder {est.ladder})")

est = cell_formula_zero(density, M, resolutions=(4, 8))
exact = oracle_pure_conv(M, 2.0, 2.0, "zero")
print(f"delta -> 0: {est.value:.5f}  (exact {exact:.5f})")

est = cell_formula_infinity(density, M, resolutions=(8, 16))
exact = oracle_pure_conv(M, 2.0, 2.0, "infinity")
print(f"delta -> i: {est.value:.5f}  (exact {exact:.5f})")
