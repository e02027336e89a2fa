"""
Batch Sinkhorn imputation and GAIN
==================================

Both learned imputers work on min-max normalised data. The harness does the
normalisation; here we do it by hand on one player's time x angle slice.
"""

# %%
import numpy as np

from mocap_impute import generate_synthetic_cohort, normalize
from mocap_impute.imputers import ImputerConfig, impute
from mocap_impute.missingness import MissingnessSpec, apply_mask, generate_missing_mask

x, _ = generate_synthetic_cohort(10, 100, 8, seed=3)
mask = generate_missing_mask(x, MissingnessSpec("mcar", 0.2, seed=3))
work, params = normalize(apply_mask(x, mask), mask)
slice_ = work[0]
print("normalised range", np.nanmin(slice_), np.nanmax(slice_))

# %%
# BSI treats the holes as parameters and pulls random half-batches of rows
# towards each other in Sinkhorn divergence.
bsi = impute(slice_, ImputerConfig("BSI", {"steps": 100}, seed=3))
trace = bsi.diagnostics["loss_trace"]
print(f"BSI loss {np.mean(trace[:10]):.4f} -> {np.mean(trace[-10:]):.4f}, epsilon {bsi.diagnostics['epsilon']:.4f}")

# %%
# GAIN trains a generator against a discriminator that tries to tell observed
# cells from imputed ones, with hints revealing most of the mask.
gain = impute(slice_, ImputerConfig("GAIN", seed=3))
d = gain.diagnostics
print(f"GAIN observed-cell MSE {d['mse_init']:.4f} -> {d['mse_final']:.4f}")

# %%
truth = (x[0] - params.min) / (params.max - params.min + 1e-6)
holes = np.isnan(slice_)
for name, res in (("BSI", bsi), ("GAIN", gain)):
    print(f"{name:>4} normalised MAE {np.abs(res.values - truth)[holes].mean():.4f}")
