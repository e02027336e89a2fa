"""
Masks and imputation contexts
=============================

A synthetic cohort stands in for motion-capture recordings: every player
performs the same movement with small personal variations, and some joint
angles are coupled to each other.
"""

# %%
import numpy as np

from mocap_impute import generate_synthetic_cohort, generate_missing_mask, MissingnessSpec
from mocap_impute.harness import apply_imputation, calculate_mae
from mocap_impute.imputers import ImputerConfig
from mocap_impute.missingness import find_local_extrema, run_lengths

x, manifest = generate_synthetic_cohort(10, 100, 8, seed=0)  # P, T, A
print(x.shape, manifest.angles[:3])

# %%
# The three mechanisms all hide exactly floor(fraction * T) points per series.
# They differ in *where* those points go.
for mech in ("mcar", "transition", "block"):
    mask = generate_missing_mask(x, MissingnessSpec(mech, 0.2, seed=1))
    row = mask[0, :, 0]
    print(f"{mech:>10}: {row.sum()} hidden, runs {run_lengths(row)}")

# %%
# Transition masks prefer turning points of the movement.
series = x[0, :, 0]
extrema = find_local_extrema(series)
mask = generate_missing_mask(x, MissingnessSpec("transition", 0.05, seed=1))
print("extrema:", sorted(extrema))
print("hidden: ", np.flatnonzero(mask[0, :, 0]).tolist())

# %%
# The same KNN imputer sees very different data depending on how the tensor
# is sliced. Other players doing the same movement are the best neighbours.
mask = generate_missing_mask(x, MissingnessSpec("transition", 0.25, seed=1))
knn = ImputerConfig("KNN", seed=1)
for context in ("univariate", "multi-player", "multi-angle"):
    out = apply_imputation(x, mask, knn, context)
    print(f"{context:>13}: MAE {calculate_mae(x, out, mask):6.2f} deg")
