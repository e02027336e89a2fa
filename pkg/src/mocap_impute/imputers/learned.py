"""Optimisation-based imputers: batch Sinkhorn imputation and GAIN.

Both expect min-max normalized input and reject matrices outside
``[-0.01, 1.01]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import SinkhornParams, default_epsilon, sinkhorn_divergence
from .base import ImputedMatrix, ImputerConfig, as_masked_matrix, column_means, finish

RANGE_GUARD = (-0.01, 1.01)


class GainNumericalError(ArithmeticError):
    pass


def check_normalized(m: np.ndarray) -> None:
    vals = m[~np.isnan(m)]
    lo, hi = RANGE_GUARD
    if vals.size and (vals.min() < lo or vals.max() > hi):
        raise ValueError(
            f"input must be min-max normalized to [0, 1]; observed range is [{vals.min():.4g}, {vals.max():.4g}]"
        )


class Adam:
    def __init__(self, shapes, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# ---------------------------------------------------------------------------
# Batch Sinkhorn imputation
# ---------------------------------------------------------------------------


@dataclass
class BsiConfig:
    batch_size: int | None = None
    n_pairs: int = 10
    steps: int = 300
    learning_rate: float = 0.01
    init_noise: float = 0.1
    epsilon: float | None = None
    sinkhorn_max_iters: int = 200
    sinkhorn_tol: float = 1e-6
    seed: int = 0

    @classmethod
    def from_imputer_config(cls, config: ImputerConfig) -> "BsiConfig":
        return cls(seed=config.seed, **config.hyperparameters)

    def sinkhorn(self, filled: np.ndarray) -> SinkhornParams:
        """Sinkhorn settings; a missing epsilon is set from the spread of ``filled``."""
        eps = self.epsilon if self.epsilon is not None else default_epsilon(filled)
        return SinkhornParams(eps, self.sinkhorn_max_iters, self.sinkhorn_tol)


def draw_batch_pair(n: int, batch_size: int, rng: np.random.Generator):
    """Disjoint batches when ``2 * batch_size <= n``, else independent draws with replacement."""
    if 2 * batch_size <= n:
        perm = rng.permutation(n)
        return perm[:batch_size], perm[batch_size:2 * batch_size]
    return rng.integers(0, n, size=batch_size), rng.integers(0, n, size=batch_size)


def bsi_loss_and_grad(filled: np.ndarray, pairs, params: SinkhornParams):
    """Mean Sinkhorn divergence over ``pairs`` of row-index batches, and its gradient.

    The gradient is with respect to every entry of ``filled``; rows drawn more
    than once accumulate all their contributions.
    """
    grad = np.zeros_like(filled)
    loss = 0.0
    converged = True
    for i1, i2 in pairs:
        res = sinkhorn_divergence(filled[i1], filled[i2], params)
        loss += res.value
        np.add.at(grad, i1, res.grad_a)
        np.add.at(grad, i2, res.grad_b)
        converged &= res.converged
    k = len(pairs)
    return loss / k, grad / k, converged


def impute_bsi(m, config: BsiConfig | ImputerConfig) -> ImputedMatrix:
    """Treat the missing entries as parameters and fit them by minimising the
    expected Sinkhorn divergence between random batch pairs of the filled matrix."""
    if isinstance(config, ImputerConfig):
        config = BsiConfig.from_imputer_config(config)
    m = as_masked_matrix(m)
    n, d = m.shape
    if n < 2:
        raise ValueError("BSI needs at least two rows")
    check_normalized(m)
    missing = np.isnan(m)
    if not missing.any():
        return finish(m, m, steps=0, loss_trace=[])

    rng = np.random.default_rng(config.seed)
    means = column_means(m)
    filled = np.where(missing, means[None, :], m)
    theta = filled[missing] + config.init_noise * rng.standard_normal(missing.sum())
    filled[missing] = theta

    params = config.sinkhorn(filled)
    batch_size = config.batch_size or max(1, min(n // 2, 128))
    optimizer = Adam([theta.shape], lr=config.learning_rate)

    trace = []
    unconverged = 0
    for _ in range(config.steps):
        pairs = [draw_batch_pair(n, batch_size, rng) for _ in range(config.n_pairs)]
        loss, grad, ok = bsi_loss_and_grad(filled, pairs, params)
        unconverged += not ok
        trace.append(loss)
        optimizer.step([theta], [grad[missing]])
        filled[missing] = theta

    return finish(
        m, filled,
        steps=config.steps,
        loss_trace=trace,
        epsilon=params.epsilon,
        batch_size=batch_size,
        unconverged_steps=unconverged,
    )


# ---------------------------------------------------------------------------
# GAIN
# ---------------------------------------------------------------------------


@dataclass
class GainConfig:
    hidden_widths: list[int] | None = None
    alpha: float = 100.0
    hint_rate: float = 0.9
    batch_size: int = 64
    steps: int = 1000
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    seed: int = 0

    @classmethod
    def from_imputer_config(cls, config: ImputerConfig) -> "GainConfig":
        h = config.hyperparameters
        return cls(seed=config.seed, **h)


@dataclass
class MlpParams:
    """Fully connected net: ReLU hidden layers, sigmoid output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def init(cls, sizes, rng: np.random.Generator) -> "MlpParams":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            # Xavier normal
            weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / (fan_in + fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def forward(self, x):
        """Output and the per-layer activations needed by :meth:`backward`."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = 1.0 / (1.0 + np.exp(-z)) if i == last else np.maximum(z, 0.0)
            acts.append(h)
        return h, acts

    def backward(self, acts, grad_out):
        """Gradients of a scalar loss given dL/d(output); returns (param grads, dL/d(input))."""
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        out = acts[-1]
        delta = grad_out * out * (1.0 - out)
        for i in reversed(range(len(self.weights))):
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            grad_in = delta @ self.weights[i].T
            if i > 0:
                delta = grad_in * (acts[i] > 0)
        return [*gW, *gb], grad_in


def gain_generator_forward(params: MlpParams, x_filled, observedness, noise):
    """Generator output in (0, 1) for the concatenated ``[data, observedness, noise]`` input."""
    x_filled = np.asarray(x_filled, dtype=float)
    if not x_filled.shape == np.shape(observedness) == np.shape(noise):
        raise ValueError(
            f"shape mismatch: data {x_filled.shape}, observedness {np.shape(observedness)}, noise {np.shape(noise)}"
        )
    if params.weights[0].shape[0] != 3 * x_filled.shape[1]:
        raise ValueError(f"generator expects {params.weights[0].shape[0]} inputs, got {3 * x_filled.shape[1]}")
    out, _ = params.forward(np.hstack([x_filled, observedness, noise]))
    return out


def compose_imputation(x, observedness, generated):
    """Observed entries from ``x``, missing ones from ``generated``."""
    return np.where(observedness == 1, np.nan_to_num(x), generated)


PROB_CLAMP = 1e-8


def gain_losses(params_G: MlpParams, params_D: MlpParams, x, observedness, hints, noise, alpha):
    """Discriminator and generator losses for one minibatch, with backprop gradients.

    ``observedness`` is 1 where ``x`` is observed. The discriminator is scored
    on recovering it; the generator pays the adversarial term on imputed cells
    plus ``alpha`` times the reconstruction MSE on observed cells.

    Returns ``(loss_D, loss_G, grads)`` where ``grads`` maps ``"D"`` and ``"G"``
    to lists aligned with :meth:`MlpParams.arrays`.
    """
    o = np.asarray(observedness, dtype=float)
    x = np.nan_to_num(np.asarray(x, dtype=float))
    x_in = o * x + (1 - o) * noise
    G, acts_G = params_G.forward(np.hstack([x_in, o, noise]))
    x_hat = o * x + (1 - o) * G
    D, acts_D = params_D.forward(np.hstack([x_hat, hints]))

    n_cells = D.size
    inside = (D > PROB_CLAMP) & (D < 1 - PROB_CLAMP)
    Dc = np.clip(D, PROB_CLAMP, 1 - PROB_CLAMP)
    loss_D = -np.mean(o * np.log(Dc) + (1 - o) * np.log(1 - Dc))
    adv = -np.mean((1 - o) * np.log(Dc))
    n_obs = o.sum()
    mse = ((o * (x - G)) ** 2).sum() / n_obs if n_obs else 0.0
    loss_G = adv + alpha * mse

    dD = -(o / Dc - (1 - o) / (1 - Dc)) / n_cells * inside
    grads_D, _ = params_D.backward(acts_D, dD)

    dD_adv = -((1 - o) / Dc) / n_cells * inside
    _, d_input = params_D.backward(acts_D, dD_adv)
    dG = d_input[:, : x.shape[1]] * (1 - o)
    if n_obs:
        dG += alpha * (-2.0 * o * (x - G) / n_obs)
    grads_G, _ = params_G.backward(acts_G, dG)

    return float(loss_D), float(loss_G), {"D": grads_D, "G": grads_G, "mse": float(mse)}


def make_hints(observedness, hint_rate, rng):
    reveal = (rng.random(observedness.shape) < hint_rate).astype(float)
    return observedness * reveal + 0.5 * (1 - reveal)


def impute_gain(m, config: GainConfig | ImputerConfig) -> ImputedMatrix:
    if isinstance(config, ImputerConfig):
        config = GainConfig.from_imputer_config(config)
    m = as_masked_matrix(m)
    n, d = m.shape
    check_normalized(m)
    missing = np.isnan(m)
    if not missing.any():
        return finish(m, m, steps=0)

    rng = np.random.default_rng(config.seed)
    widths = list(config.hidden_widths or [d, d])
    G = MlpParams.init([3 * d, *widths, d], rng)
    D = MlpParams.init([2 * d, *widths, d], rng)
    opt_G = Adam([p.shape for p in G.arrays()], config.learning_rate, config.adam_beta1, config.adam_beta2)
    opt_D = Adam([p.shape for p in D.arrays()], config.learning_rate, config.adam_beta1, config.adam_beta2)

    x = np.nan_to_num(m)
    o = (~missing).astype(float)
    batch = min(config.batch_size, n)
    # fixed probe noise so the before/after reconstruction errors are comparable
    probe = rng.uniform(0, 0.01, size=(n, d))

    def observed_mse():
        out = gain_generator_forward(G, o * x + (1 - o) * probe, o, probe)
        return float(((o * (x - out)) ** 2).sum() / max(o.sum(), 1))

    mse_init = observed_mse()
    trace = []
    for step in range(config.steps):
        idx = rng.choice(n, size=batch, replace=False)
        xb, ob = x[idx], o[idx]
        z = rng.uniform(0, 0.01, size=(batch, d))
        h = make_hints(ob, config.hint_rate, rng)

        loss_d, _, grads = gain_losses(G, D, xb, ob, h, z, config.alpha)
        opt_D.step(D.arrays(), grads["D"])
        _, loss_g, grads = gain_losses(G, D, xb, ob, h, z, config.alpha)
        opt_G.step(G.arrays(), grads["G"])
        if not (np.isfinite(loss_d) and np.isfinite(loss_g)):
            raise GainNumericalError(f"non-finite GAIN loss at step {step}")
        trace.append((loss_d, loss_g))

    z = rng.uniform(0, 0.01, size=(n, d))
    generated = gain_generator_forward(G, o * x + (1 - o) * z, o, z)
    return finish(
        m, compose_imputation(m, o, generated),
        steps=config.steps,
        loss_trace=trace,
        mse_init=mse_init,
        mse_final=observed_mse(),
    )
