"""What one distribution shift does to standard and regularized Bayes.

The generator plays (0.75, 0.25) for two thirds of the run, then flips.
A standard Bayesian has piled so much posterior evidence on the first
model that it cannot unlearn within the remaining third: its regret
against the per-interval benchmark is a constant fraction of T.  The
regularized update keeps the discarded model's weight above eps_t =
t^-2, so recovery takes O(log T) steps and total regret fits a + b ln T.
"""

import numpy as np

from marketsel.catalog import builtin_scenarios
from marketsel.experiments import run_scenario

scenarios = builtin_scenarios()

for name in ("prop7", "thm8_shift"):
    scenario = scenarios[name]
    print(f"\n{name}: {scenario.description}")
    for horizon in (9_000, 30_000, 90_000):
        result = run_scenario(scenario, horizon=horizon, n_seeds=10)
        shifted = result.shifted_regrets[:, 0]
        print(
            f"  T={horizon:>6}: interval regret mean {shifted.mean():8.1f} nats "
            f"({shifted.mean() / horizon:.4f} per step)"
        )

# The robust run's regret grows like b ln T; fit it.
scenario = scenarios["thm8_shift"]
horizons = np.array([10_000, 40_000, 160_000])
means = []
for horizon in horizons:
    result = run_scenario(scenario, horizon=int(horizon), n_seeds=10)
    means.append(result.shifted_regrets[:, 0].mean())
b, a = np.polyfit(np.log(horizons), means, 1)
print(f"\nregularized Bayes under one shift: regret ~ {a:.2f} + {b:.2f} ln T")
print("regularization floor held exactly on every run:",
      bool(result.robust_floor_margins.min() >= -1e-15))
