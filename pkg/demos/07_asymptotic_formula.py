"""Recover the cell value from minimization problems on growing boxes.

H_R is the normalized minimum over a box of side R with the affine
datum held on a unit collar.  The boundary layer removes an O(1/R)
share of the interactions, so H_R climbs toward the cell value from
below as R grows.
"""

import numpy as np

from nlthin import SolverOptions, asymptotic_formula, pure_convolution

rows = asymptotic_formula(pure_convolution(1.0, 2.0), 1.0, np.eye(1),
                          R_sequence=(4, 8), resolution=8,
                          opts=SolverOptions(tol_g=1e-6, max_iters=400))
for row in rows:
    print(f"R = {row['R']:<4g} H_R = {row['H_R']:.5f}")
print("cell value (exact): 2.0")
