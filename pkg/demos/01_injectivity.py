"""
When do squared frame coefficients determine a signal?
======================================================

A real signal is recoverable up to sign from ``|<x, f_k>|^2`` exactly when
every split of the frame vectors into two groups leaves at least one group
spanning the space. For ``m = 2n - 1`` vectors this is the same as every
``n`` of them being linearly independent.
"""

import numpy as np

from phaseless import Frame, a0_estimate, full_spark_check, partition_injectivity_check

# The smallest interesting case: three vectors in the plane.
F = Frame([[1, 0], [0, 1], [1, 1]])
print("three vectors in R^2:", partition_injectivity_check(F), full_spark_check(F))

# Dropping the diagonal vector breaks injectivity. The witness is a group of
# rows that, together with its complement, fails to span R^2.
G = Frame([[1, 0], [0, 1]])
print("two vectors in R^2:  ", partition_injectivity_check(G))

# (1, 1) and (1, -1) give the same intensities under the orthonormal pair.
print("   phi(1, 1) =", (G.vectors @ [1, 1]) ** 2, " phi(1, -1) =", (G.vectors @ [1, -1]) ** 2)

# Random Gaussian frames with m = 2n - 1 are full spark with probability one.
rng = np.random.default_rng(0)
for n in (2, 3, 4):
    R = Frame(rng.standard_normal((2 * n - 1, n)))
    print(f"n={n}, m={2 * n - 1}: partition {partition_injectivity_check(R).injective}, "
          f"full spark {full_spark_check(R)[0]}")

# a0 measures how robustly injective the frame is: the smallest value of
# sum_k <x,f_k>^2 <y,f_k>^2 over unit x, y. It is zero for G and 1/3 for F.
print("a0(F) ~", round(a0_estimate(F), 6), "  a0(G) ~", round(a0_estimate(G), 12))
