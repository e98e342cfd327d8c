"""Compare the four sampling strategies for the expected homogenized tensor.

The material is the checkerboard written as a perturbed periodic law
(background 3*Id, perturbation +17*Id on Bernoulli(1/2) cells) so that the
defect-based control variate and the selection sampler both apply. All
strategies run at the same box size and sample count; the table reports
equal-cost variance-reduction factors against plain Monte Carlo for the
11 tensor entry.

Runtime: a few minutes (each sample solves two corrector problems).
"""

import numpy as np

from randpde import (PerturbedPeriodic, antithetic_estimate, compare_strategies,
                     control_variate_estimate, defect_coefficients, mc_estimate,
                     sqs_auxiliary, sqs_estimate)

N, R, M, SEED = 10, 8, 100, 424242
POOL = 2000

law = PerturbedPeriodic(a_per=3 * np.eye(2), c_per=17 * np.eye(2), eta=0.5)

print("offline stage: defect catalog and selection integrals ...")
defects = defect_coefficients(law, n=N, r=R, order=2)
aux = sqs_auxiliary(11.5 * np.eye(2), 17.0 * np.eye(2), n=N, r=R)
print(f"  defect catalog: {len(defects.a_2def)} pair offsets, "
      f"{defects.solves} PDE solves")

print("online stage: running the strategies ...")
reports = [
    mc_estimate(law, N, R, M, SEED),
    antithetic_estimate(law, N, R, M // 2, SEED),
    control_variate_estimate(law, N, R, M, 1, SEED, defects),
    control_variate_estimate(law, N, R, M, 2, SEED, defects),
    sqs_estimate(law, N, R, M, SEED, mode="exact1"),
    sqs_estimate(law, N, R, M, SEED, mode="ranked2", pool=POOL, aux=aux),
]
table = compare_strategies(reports)

print(f"\n{'strategy':>12} {'mean A11':>10} {'ci95':>8} {'equal-cost gain':>16}")
for rep in reports:
    row = table.row(rep.strategy, "11")
    print(f"{rep.strategy:>12} {rep.mean[0, 0]:>10.4f} {rep.ci95[0, 0]:>8.4f} "
          f"{row['factor_equal_cost']:>16.1f}")
print("\nAntithetic pairs cancel the leading noise; the control variate "
      "subtracts the defect surrogate (the pair catalog buys the second "
      "jump); selection sampling solves only moment-matched configurations.")
