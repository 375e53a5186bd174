"""Probe how the interaction energy of a planar sinusoid scales in
(eps, gamma).

For the indicator kernel the exact piecewise law is known, so the ratio
column should sit at 1 across both regimes (thin: 2 gamma < eps, thick:
the opposite).  For a vertically singular kernel with exponent beta the
same probe instead fits a power law, predicted slope beta - 1.
"""

from nlthin import cylinder_indicator, scaling_probe, vertical_singular

pairs = [(1 / 8, 1 / 8), (1 / 16, 1 / 16), (1 / 8, 1 / 32),
         (1 / 16, 1 / 64), (1 / 32, 1 / 8), (1 / 64, 1 / 16)]
table = scaling_probe(cylinder_indicator(1.0), 2.0, pairs)
print("indicator kernel (ratio vs exact piecewise law):")
for row in table.rows:
    print(f"    eps {row['eps']:<8g} gamma {row['gamma']:<8g} "
          f"ratio {row['ratio']:.5f}")

grid = [(lam / 64, 1 / 64) for lam in (2, 4, 8, 16, 32)]
table = scaling_probe(vertical_singular(0.5), 2.0, grid)
print(f"\nsingular kernel beta = 0.5: fitted exponent "
      f"{table.fitted_exponent:.4f} (predicted -0.5)")
