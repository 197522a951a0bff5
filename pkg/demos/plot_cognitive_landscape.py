"""
Objective landscapes of the depletion model
===========================================

Synthetic practice-test data are generated from the depletion model and
a logistic outcome rule. Each rate is then varied on its own, the model
is re-integrated over the same task schedules, and three objectives
score the resulting end-of-task resource against the recorded outcomes.
"""

import numpy as np

from infofit.datagen import generate_dataset
from infofit.objectives import ObjectiveSpec, candidate_resources, evaluate_resources
from infofit.optimize import factor_grid

data = generate_dataset(master_seed=0)
print(f"{data.n_tasks} tasks, success rate {data.success_rate():.3f}, "
      f"alpha={data.outcome_model.alpha:.1f}, A_ref={data.outcome_model.A_ref:.4f}")

kinds = ("mi", "kl_prior", "kl_disjoint")
specs = {k: ObjectiveSpec(k) for k in kinds}

for name in ("k_w", "k_r", "B_max"):
    grid = factor_grid(getattr(data.gen_params, name))
    table = {k: [] for k in kinds}
    for v in grid:
        fitted = candidate_resources(data, data.gen_params.with_param(name, v))
        for k in kinds:
            table[k].append(evaluate_resources(specs[k], data, fitted).value)
    print(f"\n{name} (generating value {grid[4]:g})")
    print("  factor " + " ".join(f"{f:7.3f}" for f in grid / grid[4]))
    for k in kinds:
        print(f"  {k:11s}" + " ".join(f"{v:7.4f}" for v in table[k]))

# The KL to the true per-outcome samples is exactly zero at the
# generating values, since the fitted and reference samples coincide.
# A single dataset gives a noisy MI curve, with a dip at the truth on
# this seed; the median over five datasets peaks at the generating value
# for all three rates (see tests/test_acceptance.py). The symmetric
# divergence between the outcome classes tends to peak at the truth as
# well: outcomes depend on the candidate's A only through the true A, so
# a wrong rate can only blur how A separates the classes.
