"""Artificial missingness: MCAR, transition-point and block masks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .data import DimensionError, check_mask, check_tensor


class Mechanism(str, Enum):
    MCAR = "mcar"
    TRANSITION = "transition"
    BLOCK = "block"


class MissingnessSpecError(ValueError):
    """Inconsistent missingness parameters."""


@dataclass(frozen=True)
class MissingnessSpec:
    mechanism: Mechanism
    fraction: float
    num_blocks: int = 3
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        if not 0.0 < self.fraction <= 1.0:
            raise MissingnessSpecError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.num_blocks < 1:
            raise MissingnessSpecError("num_blocks must be at least 1")

    def count(self, T: int) -> int:
        """Per-series missing count ``floor(fraction * T)``."""
        # the epsilon guards against 0.29 * 100 == 28.999999999999996
        k = math.floor(self.fraction * T + 1e-9)
        if k < 1:
            raise MissingnessSpecError(f"fraction {self.fraction} of T={T} masks no entries")
        return k

    def to_json(self) -> str:
        d = asdict(self)
        d["mechanism"] = self.mechanism.value
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "MissingnessSpec":
        return cls(**json.loads(text))


def find_local_extrema(series) -> dict[int, str]:
    """Interior strict local extrema of ``series`` as ``{index: "min" | "max"}``.

    Each point is compared with the nearest *differing* value on either side,
    so a flat plateau that forms a peak or valley counts once, at its first
    index. Endpoints never qualify.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise ValueError(f"need a 1-D series of length >= 3, got shape {x.shape}")
    starts = np.flatnonzero(np.r_[True, x[1:] != x[:-1]])
    levels = x[starts]
    out = {}
    for r in range(1, len(starts) - 1):
        left, mid, right = levels[r - 1], levels[r], levels[r + 1]
        if mid > left and mid > right:
            out[int(starts[r])] = "max"
        elif mid < left and mid < right:
            out[int(starts[r])] = "min"
    return out


def series_rng(seed: int, p: int, a: int) -> np.random.Generator:
    """Independent generator for series ``(p, a)``; independent of visit order."""
    return np.random.default_rng([seed, p, a])


def _mcar(T, k, rng):
    return rng.choice(T, size=k, replace=False)


def _transition(series, k, rng):
    extrema = np.fromiter(find_local_extrema(series), dtype=int)
    take = min(k, extrema.size)
    picked = rng.choice(extrema, size=take, replace=False) if take else np.empty(0, dtype=int)
    if take < k:
        rest = np.setdiff1d(np.arange(series.size), extrema)
        picked = np.concatenate([picked, rng.choice(rest, size=k - take, replace=False)])
    return picked


def _block(T, k, n_blocks, rng):
    if n_blocks > k:
        raise MissingnessSpecError(f"num_blocks={n_blocks} exceeds missing count k={k}")
    length = math.floor(k / n_blocks + 0.5)
    bounds = [(i * T) // n_blocks for i in range(n_blocks + 1)]
    if length > min(b - a for a, b in zip(bounds, bounds[1:])):
        raise MissingnessSpecError(f"block length {length} exceeds segment length for T={T}, num_blocks={n_blocks}")

    # only the last block absorbs the rounding surplus or deficit
    lengths = [length] * n_blocks
    deficit = k - length * n_blocks
    i = n_blocks - 1
    while deficit < 0:
        cut = min(-deficit, lengths[i])
        lengths[i] -= cut
        deficit += cut
        i -= 1

    row = np.zeros(T, dtype=bool)
    last = None
    for i in range(n_blocks):
        lo, hi = bounds[i], bounds[i + 1]
        # start in [min(seg), max(seg) - L] keeps a gap before the next segment;
        # a block filling its whole segment is the only exception
        upper = hi - 1 - length if hi - 1 - length >= lo else hi - length
        start = int(rng.integers(lo, upper + 1))
        if lengths[i]:
            row[start:start + lengths[i]] = True
            last = (start, start + lengths[i])

    # extend the last block rightward, then leftward, until the count is exact
    s, e = last
    while row.sum() < k:
        if e < T and not row[e]:
            row[e] = True
            e += 1
        else:
            s -= 1
            row[s] = True
    return np.flatnonzero(row)


def generate_missing_mask(tensor: np.ndarray, spec: MissingnessSpec) -> np.ndarray:
    """Mask with exactly ``spec.count(T)`` flagged time steps in every ``(p, a)`` series."""
    tensor = check_tensor(tensor)
    P, T, A = tensor.shape
    k = spec.count(T)
    if k > T:
        raise MissingnessSpecError(f"missing count {k} exceeds series length {T}")
    if spec.mechanism is Mechanism.TRANSITION and np.isnan(tensor).any():
        raise ValueError("transition masks need a complete tensor")

    mask = np.zeros((P, T, A), dtype=np.uint8)
    for p in range(P):
        for a in range(A):
            rng = series_rng(spec.seed, p, a)
            if spec.mechanism is Mechanism.MCAR:
                idx = _mcar(T, k, rng)
            elif spec.mechanism is Mechanism.TRANSITION:
                idx = _transition(tensor[p, :, a], k, rng)
            else:
                idx = _block(T, k, spec.num_blocks, rng)
            mask[p, idx, a] = 1
    return mask


def apply_mask(tensor: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Copy of ``tensor`` with NaN wherever ``mask`` is 1."""
    tensor = np.asarray(tensor, dtype=float)
    if np.asarray(mask).shape != tensor.shape:
        raise DimensionError(f"mask shape {np.asarray(mask).shape} does not match tensor shape {tensor.shape}")
    mask = check_mask(mask, tensor.shape)
    return np.where(mask == 1, np.nan, tensor)


def run_lengths(row) -> list[int]:
    """Lengths of the maximal runs of ones in a 0/1 vector."""
    row = np.asarray(row).astype(int)
    edges = np.diff(np.r_[0, row, 0])
    return (np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)).tolist()
