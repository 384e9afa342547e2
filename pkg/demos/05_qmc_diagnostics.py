"""Low-discrepancy points, star-discrepancy, and the quadrature-error bound.

Sobol points in base 2 cover the cube far more evenly than i.i.d. draws;
the Koksma-Hlawka inequality turns that into a quadrature-error guarantee
|integral - sample mean| <= V_HK(f) * D*_N.
"""

import numpy as np

from gslearn import (ProductDensity, hk_variation_upper, inverse_transform,
                     koksma_hlawka_check, sobol_points, star_discrepancy,
                     uniform_points)

print("star-discrepancy, d=2 (exact sweep):")
print(f"{'N':>6} {'sobol':>10} {'uniform':>10}")
for k in (4, 6, 8, 10):
    n = 2**k
    ds = star_discrepancy(sobol_points(n, 2)).value
    du = star_discrepancy(uniform_points(n, 2, seed=k)).value
    print(f"{n:>6} {ds:>10.5f} {du:>10.5f}")

f = lambda pts: pts[..., 0] * pts[..., 1]
print(f"\nV_HK(xy) upper bound: {hk_variation_upper(f, 2):.4f} (exact 3)")
for n in (64, 256, 1024):
    rep = koksma_hlawka_check(f, sobol_points(n, 2), true_integral=0.25)
    print(f"N={n:>5}: |error|={rep.qmc_error:.2e} <= "
          f"bound={rep.bound:.2e}  holds={rep.holds}")

# sampling a non-uniform product density through the inverse transform:
# g(u) = 2u turns Sobol points into a low-discrepancy sample of G(u) = u^2
density = ProductDensity.from_spec({"family": "linear", "slope": 1.0}, d=1)
base = sobol_points(512, 1)
tilted = inverse_transform(base, density)
us = np.sort(tilted.points[:, 0])
ks = np.abs(np.arange(1, 513) / 512 - us**2).max()
print(f"\ninverse transform of g(u)=2u: KS distance to u^2 = {ks:.2e} "
      f"(input D* = {star_discrepancy(base).value:.2e})")
