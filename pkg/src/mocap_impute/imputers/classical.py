"""Statistical fills and classical matrix imputers.

Every function takes a matrix with NaN marking missing entries and an
:class:`ImputerConfig`, and returns an :class:`ImputedMatrix` whose observed
entries are the input entries unchanged.
"""

from __future__ import annotations

import numpy as np

from ..numerics import RankError, ridge_fit, soft_threshold_svd, truncated_svd
from .base import (
    DegenerateInputError,
    ImputedMatrix,
    ImputerConfig,
    as_masked_matrix,
    column_means,
    finish,
    mean_fill,
)


def impute_simple_mean(m, config: ImputerConfig) -> ImputedMatrix:
    m = as_masked_matrix(m)
    return finish(m, mean_fill(m))


def _lower_median(values: np.ndarray) -> float:
    values = np.sort(values)
    return float(values[(len(values) - 1) // 2])


def impute_simple_median(m, config: ImputerConfig) -> ImputedMatrix:
    """Column lower-median fill (even counts take the smaller middle value)."""
    m = as_masked_matrix(m)
    observed = ~np.isnan(m)
    if not observed.any():
        raise DegenerateInputError("matrix has no observed entries")
    fallback = _lower_median(m[observed])
    fills = np.array([
        _lower_median(m[observed[:, j], j]) if observed[:, j].any() else fallback
        for j in range(m.shape[1])
    ])
    return finish(m, np.where(observed, m, fills[None, :]))


def impute_simple_random(m, config: ImputerConfig) -> ImputedMatrix:
    """Draw each missing entry uniformly, with replacement, from its column's observed values."""
    m = as_masked_matrix(m)
    observed = ~np.isnan(m)
    if not observed.any():
        raise DegenerateInputError("matrix has no observed entries")
    rng = np.random.default_rng(config.seed)
    everything = m[observed]
    filled = m.copy()
    for j in range(m.shape[1]):
        holes = np.flatnonzero(~observed[:, j])
        if holes.size == 0:
            continue
        pool = m[observed[:, j], j] if observed[:, j].any() else everything
        filled[holes, j] = pool[rng.integers(0, pool.size, size=holes.size)]
    return finish(m, filled)


def knn_distances(m: np.ndarray) -> np.ndarray:
    """Row-to-row distances over co-observed columns.

    The mean squared difference on co-observed columns is divided by the
    co-observed fraction, so pairs sharing few columns look further apart.
    Pairs with nothing in common get ``inf``.
    """
    d = m.shape[1]
    diff2 = (m[:, None, :] - m[None, :, :]) ** 2
    co = (~np.isnan(diff2)).sum(axis=2)
    sumsq = np.nansum(diff2, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist2 = sumsq * d / co**2
    dist2[co == 0] = np.inf
    return np.sqrt(dist2)


def impute_knn(m, config: ImputerConfig) -> ImputedMatrix:
    """Inverse-distance weighted average over the K nearest rows observing the column."""
    m = as_masked_matrix(m)
    n = m.shape[0]
    if n < 2:
        raise ValueError("KNN imputation needs at least two rows")
    K = int(config["K"])
    observed = ~np.isnan(m)
    fallback = column_means(m)
    dist = knn_distances(m)
    filled = m.copy()
    n_fallback = 0
    for i in np.flatnonzero((~observed).any(axis=1)):
        row_dist = dist[i].copy()
        row_dist[i] = np.inf
        order = np.argsort(row_dist, kind="stable")
        for j in np.flatnonzero(~observed[i]):
            cand = order[observed[order, j] & np.isfinite(row_dist[order])][:K]
            if cand.size == 0:
                filled[i, j] = fallback[j]
                n_fallback += 1
                continue
            dk = row_dist[cand]
            if (dk == 0).any():
                filled[i, j] = m[cand[dk == 0], j].mean()
            else:
                w = 1.0 / dk
                filled[i, j] = (w * m[cand, j]).sum() / w.sum()
    return finish(m, filled, fallback_fills=n_fallback)


def _check_matrix_shape(m: np.ndarray, what: str) -> None:
    if min(m.shape) < 2:
        raise ValueError(f"{what} needs at least a 2x2 matrix, got {m.shape}")


def _fixed_point(m, step, max_iters: int, tol: float, momentum: bool = False) -> ImputedMatrix:
    """Iterate ``Z <- step(observed-overwrite(Z), k)`` from the column-mean fill.

    ``step`` returns the new iterate and whether the convergence test applies
    at iteration ``k`` yet. With ``momentum`` the step is taken from a Nesterov
    extrapolation of the last two iterates instead of the last one.
    """
    missing = np.isnan(m)
    z = mean_fill(m)
    if not missing.any():
        return finish(m, z, iterations=0, converged=True)
    converged = False
    it = 0
    y, t = z, 1.0
    for it in range(1, max_iters + 1):
        z_new, final_phase = step(np.where(missing, y, m), it)
        change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z), 1e-12)
        if momentum:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = z_new + ((t - 1.0) / t_next) * (z_new - z)
            t = t_next
        else:
            y = z_new
        z = z_new
        if final_phase and change < tol:
            converged = True
            break
    return finish(m, z, iterations=it, converged=converged)


# per-iteration decay of the shrinkage while it is above its target
CONTINUATION_DECAY = 0.8


def impute_soft(m, config: ImputerConfig) -> ImputedMatrix:
    """SoftImpute: repeated nuclear-norm proximal steps with observed entries re-imposed.

    The shrinkage starts at half the top singular value and decays
    geometrically to its target, and each step is taken from a Nesterov
    extrapolated point. The fixed point is the same as the plain iteration;
    with a small target shrinkage the plain iteration removes a spurious
    direction by only that shrinkage per step and needs thousands of steps.
    """
    m = as_masked_matrix(m)
    _check_matrix_shape(m, "SoftImpute")
    if not np.isnan(m).any():
        return finish(m, m, iterations=0, converged=True)
    sigma_max = np.linalg.norm(mean_fill(m), 2)
    shrinkage = config["soft_shrinkage_ratio"] * sigma_max

    def step(z, k):
        lam = max(shrinkage, 0.5 * sigma_max * CONTINUATION_DECAY ** (k - 1))
        return soft_threshold_svd(z, lam), lam == shrinkage

    result = _fixed_point(m, step, config["max_iters"], config["tol"], momentum=True)
    result.diagnostics["shrinkage"] = shrinkage
    return result


def default_rank(shape) -> int:
    return max(1, min(min(shape) - 1, 10))


def impute_iterative_svd(m, config: ImputerConfig) -> ImputedMatrix:
    m = as_masked_matrix(m)
    _check_matrix_shape(m, "IterativeSVD")
    rank = config["rank"] or default_rank(m.shape)
    if not 1 <= rank <= min(m.shape) - 1:
        raise RankError(f"IterativeSVD rank must lie in [1, {min(m.shape) - 1}], got {rank}")

    def project(z, k):
        U, s, V = truncated_svd(z, rank)
        return (U * s) @ V.T, True

    result = _fixed_point(m, project, config["max_iters"], config["tol"])
    result.diagnostics["rank"] = rank
    return result


def impute_iterative_regression(m, config: ImputerConfig) -> ImputedMatrix:
    """Chained ridge regressions, one column at a time, most-missing column first."""
    m = as_masked_matrix(m)
    n, d = m.shape
    if d < 2:
        raise ValueError("iterative regression needs at least two columns")
    missing = np.isnan(m)
    z = mean_fill(m)
    counts = missing.sum(axis=0)
    # descending missing count, ties by column index
    order = [j for j in np.lexsort((np.arange(d), -counts)) if counts[j] > 0]
    if not order:
        return finish(m, z, rounds=0, converged=True)

    lam = config["ridge_lambda"]
    converged = False
    rounds = 0
    for rounds in range(1, config["mice_rounds"] + 1):
        biggest_change = 0.0
        for j in order:
            rows = ~missing[:, j]
            if not rows.any():
                continue
            X = np.delete(z, j, axis=1)
            w, b = ridge_fit(X[rows], z[rows, j], lam)
            pred = X[~rows] @ w + b
            biggest_change = max(biggest_change, float(np.abs(pred - z[~rows, j]).max()))
            z[~rows, j] = pred
        if biggest_change < config["tol"]:
            converged = True
            break
    return finish(m, z, rounds=rounds, converged=converged)
