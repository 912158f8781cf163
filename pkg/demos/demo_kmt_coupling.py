#!/usr/bin/env python3
"""The dyadic walk/Brownian-motion coupling and its logarithmic discrepancy."""

import math

import numpy as np

from condwalk import kmt

print("== one coupled pair, n = 2^16 ==")
pair = kmt.dyadic_couple_1d(1 << 16, seed=21)
print(f"walk steps all +-1: {np.all(np.abs(np.diff(pair.S)) == 1)}")
print(f"BM increment variance: {np.diff(pair.W).var():.4f}")
print(f"max |S_k - W_k| = {pair.max_discrepancy():.2f} "
      f"(C ln n would be ~{0.6 * math.log(1 << 16):.1f})")

print("\n== discrepancy growth is affine in ln n ==")
res = kmt.discrepancy_experiment(range(10, 19), 25, seed=22)
for j, med in zip(res["exponents"], res["medians"]):
    print(f"  n = 2^{j:2d}: median max discrepancy {med:5.2f}")
print(f"fit: {res['slope']:.3f} * ln n + {res['intercept']:.3f}, "
      f"R^2 = {res['r_squared']:.4f}")

print("\n== exponential tails above the median ==")
tail = kmt.tail_experiment(1 << 14, 1500, seed=23)
print(f"fitted decay rate lambda = {tail['lambda_hat']:.2f}")

print("\n== planar lift by the diagonal rotation ==")
pu = kmt.dyadic_couple_1d(1 << 14, seed=24, replica=0)
pv = kmt.dyadic_couple_1d(1 << 14, seed=24, replica=1)
pair2 = kmt.lift_to_2d(pu, pv)
steps = np.diff(pair2.S, axis=0)
counts = {(1, 0): 0, (-1, 0): 0, (0, 1): 0, (0, -1): 0}
for s in map(tuple, steps):
    counts[s] += 1
print("step frequencies:", {k: round(v / len(steps), 4) for k, v in counts.items()})
print(f"2d max discrepancy {pair2.max_discrepancy():.2f} <= "
      f"max of the 1d ones {max(pu.max_discrepancy(), pv.max_discrepancy()):.2f}")
print("between-integer control at bound 3 + max:",
      kmt.controlled_between_integers_check(pair2, pair2.max_discrepancy() + 3, seed=1))
