"""Linear-algebra and optimal-transport kernels shared by the imputers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RankError(ValueError):
    pass


def truncated_svd(m, rank: int):
    """Leading ``rank`` singular triplets ``(U, s, V)`` with ``m ~= U @ diag(s) @ V.T``."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    if not 1 <= rank <= min(m.shape):
        raise RankError(f"rank must lie in [1, {min(m.shape)}], got {rank}")
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    return U[:, :rank], s[:rank], Vt[:rank].T


def soft_threshold_svd(m, shrinkage: float) -> np.ndarray:
    """Proximal operator of the nuclear norm: shrink every singular value by ``shrinkage``."""
    m = np.asarray(m, dtype=float)
    if not np.isfinite(m).all():
        raise ValueError("soft_threshold_svd needs a finite matrix")
    if shrinkage < 0:
        raise ValueError("shrinkage must be non-negative")
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    s = np.maximum(s - shrinkage, 0.0)
    return (U * s) @ Vt


def ridge_fit(X, y, lam: float = 1.0):
    """L2-penalised least squares with an unpenalised intercept.

    Returns ``(weights, intercept)`` minimising
    ``||y - X w - b||^2 + lam * ||w||^2``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc + lam * np.eye(X.shape[1])
    rhs = Xc.T @ yc
    if lam > 0:
        w = np.linalg.solve(gram, rhs)
    else:
        w = np.linalg.lstsq(Xc, yc, rcond=None)[0]
    return w, float(y_mean - x_mean @ w)


# ---------------------------------------------------------------------------
# Sinkhorn divergence
# ---------------------------------------------------------------------------


@dataclass
class SinkhornParams:
    epsilon: float = 0.1
    max_iters: int = 200
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0 or self.max_iters < 1 or self.tolerance <= 0:
            raise ValueError("Sinkhorn parameters must be positive")


@dataclass
class SinkhornResult:
    value: float
    grad_a: np.ndarray
    grad_b: np.ndarray
    converged: bool
    iterations: int


def sq_distances(x, y) -> np.ndarray:
    d = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2 * x @ y.T
    return np.maximum(d, 0.0)


def _softmin(eps, log_w, h, C, axis):
    """``-eps * log sum_k w_k exp((h_k - C) / eps)`` along ``axis``, max-shifted."""
    z = (h - C) / eps + log_w
    zmax = z.max(axis=axis, keepdims=True)
    return -eps * (np.log(np.exp(z - zmax).sum(axis=axis)) + zmax.squeeze(axis))


# geometric decay of the annealed regularization, per Sinkhorn update
EPS_SCALING = 0.5


def _annealing(C, eps: float) -> list[float]:
    """Regularization levels from the cost scale down to ``eps`` (exclusive)."""
    levels = []
    e = float(C.max()) if C.size else eps
    while e > eps:
        levels.append(e)
        e *= EPS_SCALING
    return levels


def entropic_ot(x, y, params: SinkhornParams):
    """Entropic OT between uniform point clouds, log-domain Sinkhorn.

    The potentials are warm-started by one update per level of a
    geometrically decreasing regularization (epsilon scaling), then
    alternating updates run at the target until the row marginals are met.
    Returns ``(cost, plan, converged, iterations)``; ``cost`` is the dual
    objective at the final potentials.
    """
    n, m = len(x), len(y)
    eps = params.epsilon
    C = sq_distances(x, y)
    log_a = np.full((n, 1), -np.log(n))
    log_b = np.full((1, m), -np.log(m))
    g = np.zeros(m)
    for e in _annealing(C, eps):
        f = _softmin(e, log_b, g[None, :], C, 1)
        g = _softmin(e, log_a, f[:, None], C, 0)
    f = _softmin(eps, log_b, g[None, :], C, 1)
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        g = _softmin(eps, log_a, f[:, None], C, 0)
        f_next = _softmin(eps, log_b, g[None, :], C, 1)
        # with g fresh, row i of the plan sums to a_i * exp((f_i - f_next_i) / eps)
        row_err = np.abs(np.expm1((f - f_next) / eps)).sum() / n
        if row_err < params.tolerance:
            converged = True
            break
        f = f_next
    plan = np.exp(log_a + log_b + (f[:, None] + g[None, :] - C) / eps)
    cost = float(f.mean() + g.mean() - eps * (plan.sum() - 1.0))
    return cost, plan, converged, it


def self_entropic_ot(x, params: SinkhornParams):
    """Entropic OT of a point cloud with itself.

    The problem is symmetric (``f == g``), so the averaged fixed-point update
    ``f <- (f + T(f)) / 2`` is used; plain alternation oscillates here.
    """
    n = len(x)
    eps = params.epsilon
    C = sq_distances(x, x)
    log_a = np.full((1, n), -np.log(n))
    f = np.zeros(n)
    for e in _annealing(C, eps):
        f = 0.5 * (f + _softmin(e, log_a, f[None, :], C, 1))
    t = _softmin(eps, log_a, f[None, :], C, 1)
    converged = False
    it = 0
    for it in range(1, params.max_iters + 1):
        f = 0.5 * (f + t)
        t = _softmin(eps, log_a, f[None, :], C, 1)
        # row i of the symmetric plan sums to a_i * exp((f_i - t_i) / eps)
        row_err = np.abs(np.expm1((f - t) / eps)).sum() / n
        if row_err < params.tolerance:
            converged = True
            break
    log_plan = (f[:, None] + f[None, :] - C) / eps - 2 * np.log(n)
    plan = np.exp(log_plan)
    cost = float(2 * f.mean() - eps * (plan.sum() - 1.0))
    return cost, plan, converged, it


def sinkhorn_divergence(a, b, params: SinkhornParams | None = None) -> SinkhornResult:
    """Debiased entropic OT ``OT(a,b) - OT(a,a)/2 - OT(b,b)/2`` with squared Euclidean cost.

    Gradients with respect to both point clouds are taken with the transport
    plans held at their converged values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"point clouds must share a feature dimension, got {a.shape} and {b.shape}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("point clouds must be finite")
    params = params or SinkhornParams()

    aa, plan_aa, ok_aa, it_aa = self_entropic_ot(a, params)
    bb, plan_bb, ok_bb, it_bb = self_entropic_ot(b, params)
    if a.shape == b.shape and np.array_equal(a, b):
        # the cross term is then the symmetric problem, where alternating updates crawl
        ab, plan_ab, ok_ab, it_ab = aa, plan_aa, ok_aa, it_aa
    else:
        ab, plan_ab, ok_ab, it_ab = entropic_ot(a, b, params)

    grad_a = 2 * (a * plan_ab.sum(1)[:, None] - plan_ab @ b)
    grad_b = 2 * (b * plan_ab.sum(0)[:, None] - plan_ab.T @ a)
    # self terms: the cost depends on the cloud through both arguments
    grad_a -= a * (plan_aa.sum(1) + plan_aa.sum(0))[:, None] - (plan_aa + plan_aa.T) @ a
    grad_b -= b * (plan_bb.sum(1) + plan_bb.sum(0))[:, None] - (plan_bb + plan_bb.T) @ b

    return SinkhornResult(
        value=ab - 0.5 * aa - 0.5 * bb,
        grad_a=grad_a,
        grad_b=grad_b,
        converged=ok_ab and ok_aa and ok_bb,
        iterations=max(it_ab, it_aa, it_bb),
    )


def default_epsilon(x, scale: float = 0.05) -> float:
    """``scale`` times the median pairwise squared distance between rows of ``x``."""
    x = np.asarray(x, dtype=float)
    d = sq_distances(x, x)[np.triu_indices(len(x), k=1)]
    med = np.median(d) if d.size else 0.0
    if med <= 0:
        pos = d[d > 0]
        med = pos.mean() if pos.size else 1.0
    return float(scale * med)
