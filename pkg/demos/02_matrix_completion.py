"""
Low-rank completion on tiny matrices
====================================

SoftImpute minimises the nuclear norm; IterativeSVD fixes the rank. On a
rank-1 matrix with one hole the two can disagree.
"""

# %%
import numpy as np

from mocap_impute.imputers import ImputerConfig, impute

m = np.outer([1.0, 2, 3], [1.0, 2, 3])
truth = m[2, 2]
m[2, 2] = np.nan

svd = impute(m, ImputerConfig("IterativeSVD", {"rank": 1})).values[2, 2]
soft = impute(m, ImputerConfig("SoftImpute", {"soft_shrinkage_ratio": 1e-4})).values[2, 2]
print(f"truth {truth}, IterativeSVD {svd:.4f}, SoftImpute {soft:.4f}")

# %%
# Why SoftImpute misses: in a 3x3 matrix a smaller fill has a lower nuclear
# norm than the rank-1 completion.
for z in (9.0, 5.0, soft):
    filled = np.nan_to_num(m)
    filled[2, 2] = z
    print(f"fill {z:7.4f}: nuclear norm {np.linalg.norm(filled, 'nuc'):.4f}")

# %%
# With more rows and columns the rank-1 completion becomes the minimiser.
rng = np.random.default_rng(0)
x = np.outer(rng.uniform(0.5, 2, 6), rng.uniform(0.5, 2, 6))
m = x.copy()
m[3, 4] = np.nan
soft = impute(m, ImputerConfig("SoftImpute", {"soft_shrinkage_ratio": 1e-4}))
print(f"6x6: truth {x[3, 4]:.4f}, SoftImpute {soft.values[3, 4]:.4f}, "
      f"{soft.diagnostics['iterations']} iterations")
