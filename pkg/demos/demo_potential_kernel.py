#!/usr/bin/env python3
"""Walkthrough of the potential-kernel machinery.

Builds the exact table by a sparse harmonicity solve, cross-checks it with
the independent series oracle, and derives the scale function and capacity
of a small avoided set.
"""

import math

import numpy as np

from condwalk import potential as P

print("== exact potential kernel on a disk ==")
table = P.potential_oracle(120)
print(f"a(0,0)  = {table.a(0, 0)}")
print(f"a(1,0)  = {table.a(1, 0):.12f}   (exact value 1)")
print(f"a(1,1)  = {table.a(1, 1):.12f}   (exact value 4/pi = {4 / math.pi:.12f})")
print(f"a(2,0)  = {table.a(2, 0):.12f}   (exact value 4 - 8/pi)")
print(f"harmonicity defect inside the disk: {table.harmonicity_defect():.2e}")

print("\n== independent series oracle (no linear algebra) ==")
for site in [(1, 0), (1, 1), (2, 0), (3, 2)]:
    s = P.potential_series(site)
    print(f"series a{site} = {s:.12f}   table diff {s - table.a(*site):+.2e}")

print("\n== asymptotic expansion ==")
for r in (10, 50, 100):
    exact = table.a(r, 0)
    asym = float(P.potential_asymptotic(r, 0))
    print(f"|x|={r:4d}: a={exact:.8f} asymptotic={asym:.8f} "
          f"residual*|x|^2 = {(math.pi / 2) * abs(exact - asym) * r * r:.4f}")

print("\n== scale function and capacity of A = {0, (1,0)} ==")
avoid = P.build_avoid_set([(0, 0), (1, 0)], 120, table)
print(f"capacity = {avoid.capacity:.8f}   (closed form a(1,0)/2 = 0.5)")
print(f"q(0,1) = {avoid.q(0, 1):.8f}   (closed form 2/pi = {2 / math.pi:.8f})")
print(f"q on A: {avoid.q(0, 0)}, {avoid.q(1, 0)}")
hm, cap = P.equilibrium_measure(avoid.sites, table)
print(f"equilibrium measure {np.round(hm, 6)} with capacity {cap:.10f}")

print("\n== exact hitting law of the conditioned walk ==")
from condwalk.excursions import shell_sites

targets = [tuple(t) for t in np.concatenate([shell_sites(2), shell_sites(4)])]
law = P.exact_hitting_distribution((3, 1), targets, 40, weights=table)
inner = sum(p for (x, y), p in law.items() if x * x + y * y <= 4)
print(f"from (3,1): P[inner shell first] = {inner:.6f}, mass = {sum(law.values()):.12f}")
