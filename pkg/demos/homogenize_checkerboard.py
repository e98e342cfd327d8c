"""Estimate the effective conductivity of the random checkerboard.

Each cell of an n x n box independently takes conductivity alpha or beta
with probability 1/2. The script solves the periodic corrector problems for
a few box sizes, averages the resulting tensors over Monte Carlo draws, and
compares against the two-phase duality value sqrt(alpha*beta), printing one
line per box size with the 95% confidence half-width.

Runtime: about a minute with the default settings.
"""

import numpy as np

from randpde import Checkerboard, mc_estimate

ALPHA, BETA = 3.0, 20.0
SIZES = (5, 10, 16)
SAMPLES = 60
REFINEMENT = 8
SEED = 7

law = Checkerboard(ALPHA, BETA)
target = np.sqrt(ALPHA * BETA)
print(f"random checkerboard, alpha={ALPHA}, beta={BETA}")
print(f"duality value sqrt(alpha*beta) = {target:.4f}\n")
print(f"{'n':>4} {'mean A11':>10} {'ci95':>8} {'mean A22':>10} {'A12':>8}")
for n in SIZES:
    rep = mc_estimate(law, n=n, r=REFINEMENT, m=SAMPLES, seed=SEED, method="direct")
    print(f"{n:>4} {rep.mean[0, 0]:>10.4f} {rep.ci95[0, 0]:>8.4f} "
          f"{rep.mean[1, 1]:>10.4f} {rep.mean[0, 1]:>8.4f}")
print("\nThe means drift toward the duality value as n grows; the residual "
      "offset at r=8 is the fine-grid resolution bias of the cell-corner "
      "singularities (shrink it by raising REFINEMENT).")
