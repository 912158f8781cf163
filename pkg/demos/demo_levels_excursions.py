#!/usr/bin/env python3
"""Level geometry and the acceptance-rejection excursion constructions."""

import numpy as np

from condwalk import diffusion as D
from condwalk import excursions as E
from condwalk import potential as P

print("== level geometry ==")
print(f"rho0 = {P.RHO0:.6f}; radii r_m = rho0 e^m:")
for m in range(7):
    print(f"  r_{m} = {float(E.level_radius(m)):9.4f}   shell size "
          f"{len(E.shell_sites(m)):4d}")
print(f"(4,0) lies between shells: membership {E.gamma_membership((4, 0))}")

table = P.potential_oracle(120)
geometry = E.LevelGeometry(table)
print("\n== acceptance weights at level 2 ==")
for y in [(1, 0), (3, 0), (3, 1)]:
    print(f"  pi(2, {y}) = {geometry.pi_weight(2, y):.6f}")

print("\n== continuous side: excursions from the circle of level 5 ==")
spec = D.DiffusionSpec()
sides, tries, dur = E.hatW_excursion_sample(5, spec, 20_000, seed=11,
                                            step_fraction=0.02)
print(f"inward frequency {(sides < 0).mean():.4f}   (exact (m-1)/2m = 0.4)")
print(f"mean tries {tries.mean():.4f}   (geometric value 1.2)")
print(f"mean duration {dur.mean():.1f} time units")

print("\n== lattice side: excursions from shell 4 ==")
rec = E.build_hatS_excursion((10, 2), 4, geometry, seed=12)
print(f"single excursion: {rec}")
ex, ey, tr, du = E.hatS_endpoint_sample((10, 2), 4, geometry, 20_000, seed=13)
down = ((ex * ex + ey * ey) <= E.shell_norm2_bounds(3)[1]).mean()
print(f"inward frequency {down:.4f} (lattice-exact value 0.3498 at this start; "
      "the idealized level chain gives 0.375)")

print("\n== the level sequence follows the 1d conditioned walk ==")
levels = E.hatW_level_chain(4, spec, 4000, seed=14, step_fraction=0.05)
down4 = ((levels[:-1] == 4) & (levels[1:] == 3)).sum() / max((levels[:-1] == 4).sum(), 1)
print(f"empirical P[4 -> 3] = {down4:.4f}   (exact 3/8 = 0.375)")
print(f"green function comparison: green(10,5) = {D.green_1csrw(10, 5)}, "
      f"linear-algebra truncation at 4000: {D.green_1csrw_exact(10, 5, 4000):.4f}")
