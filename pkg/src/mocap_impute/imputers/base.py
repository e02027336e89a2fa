"""Imputer configuration, result container and column-statistic helpers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Method(str, Enum):
    SIMPLE_MEAN = "SimpleMean"
    SIMPLE_MEDIAN = "SimpleMedian"
    SIMPLE_RANDOM = "SimpleRandom"
    KNN = "KNN"
    SOFT_IMPUTE = "SoftImpute"
    ITERATIVE_SVD = "IterativeSVD"
    ITERATIVE_IMPUTER = "IterativeImputer"
    BSI = "BSI"
    GAIN = "GAIN"


# None means "derive from the data at fit time"
DEFAULTS: dict[Method, dict] = {
    Method.SIMPLE_MEAN: {},
    Method.SIMPLE_MEDIAN: {},
    Method.SIMPLE_RANDOM: {},
    Method.KNN: {"K": 5},
    Method.SOFT_IMPUTE: {"soft_shrinkage_ratio": 0.02, "max_iters": 100, "tol": 1e-5},
    Method.ITERATIVE_SVD: {"rank": None, "max_iters": 100, "tol": 1e-5},
    Method.ITERATIVE_IMPUTER: {"ridge_lambda": 1.0, "mice_rounds": 10, "tol": 1e-5},
    Method.BSI: {
        "batch_size": None,
        "n_pairs": 10,
        "steps": 300,
        "learning_rate": 0.01,
        "init_noise": 0.1,
        "epsilon": None,
        "sinkhorn_max_iters": 200,
        "sinkhorn_tol": 1e-6,
    },
    Method.GAIN: {
        "hidden_widths": None,
        "alpha": 100.0,
        "hint_rate": 0.9,
        "batch_size": 64,
        "steps": 1000,
        "learning_rate": 1e-3,
        "adam_beta1": 0.9,
        "adam_beta2": 0.999,
    },
}

# imputers that expect min-max normalized input
SCALE_SENSITIVE = frozenset({Method.BSI, Method.GAIN})
# imputers that need at least two columns; a single column reduces them to a mean fill
MATRIX_METHODS = frozenset({Method.KNN, Method.SOFT_IMPUTE, Method.ITERATIVE_SVD, Method.ITERATIVE_IMPUTER})


class ConfigError(ValueError):
    pass


class DegenerateInputError(ValueError):
    """Nothing is observed, so nothing can be imputed."""


def _positive(value) -> bool:
    if isinstance(value, (list, tuple)):
        return all(_positive(v) for v in value)
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0


@dataclass
class ImputerConfig:
    method: Method
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        try:
            self.method = Method(self.method)
        except ValueError:
            raise ConfigError(f"unknown imputation method {self.method!r}") from None
        defaults = DEFAULTS[self.method]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ConfigError(f"{self.method.value} does not accept {sorted(unknown)}")
        merged = {**defaults, **self.hyperparameters}
        for key, value in merged.items():
            if value is not None and not _positive(value):
                raise ConfigError(f"{self.method.value}.{key} must be positive, got {value!r}")
        if self.method is Method.GAIN and not merged["hint_rate"] < 1:
            raise ConfigError("GAIN.hint_rate must lie in (0, 1)")
        self.hyperparameters = merged
        if self.name is None:
            self.name = self.method.value

    def __getitem__(self, key):
        return self.hyperparameters[key]

    @property
    def scale_sensitive(self) -> bool:
        return self.method in SCALE_SENSITIVE

    def with_seed(self, seed: int) -> "ImputerConfig":
        return ImputerConfig(self.method, dict(self.hyperparameters), seed, self.name)

    def to_dict(self) -> dict:
        return {
            "imputer": {
                "method": self.method.value,
                "name": self.name,
                "hyperparameters": self.hyperparameters,
                "seed": self.seed,
            }
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ImputerConfig":
        d = d.get("imputer", d)
        return cls(
            method=d["method"],
            hyperparameters=dict(d.get("hyperparameters", {})),
            seed=int(d.get("seed", 0)),
            name=d.get("name"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ImputerConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class ImputedMatrix:
    values: np.ndarray
    fill_locations: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def as_masked_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if np.isinf(m).any():
        raise ValueError("matrix contains infinite entries")
    return m


def column_means(m: np.ndarray) -> np.ndarray:
    """Observed column means; fully missing columns get the global observed mean."""
    observed = ~np.isnan(m)
    if not observed.any():
        raise DegenerateInputError("matrix has no observed entries")
    counts = observed.sum(axis=0)
    sums = np.where(observed, m, 0.0).sum(axis=0)
    out = np.full(m.shape[1], m[observed].mean())
    has = counts > 0
    out[has] = sums[has] / counts[has]
    return out


def mean_fill(m: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(m), column_means(m)[None, :], m)


def finish(m: np.ndarray, filled: np.ndarray, **diagnostics) -> ImputedMatrix:
    """Build the result, copying observed entries from ``m`` untouched."""
    missing = np.isnan(m)
    values = np.where(missing, filled, m)
    if not np.isfinite(values).all():
        raise FloatingPointError("imputer produced non-finite fills")
    return ImputedMatrix(values=values, fill_locations=missing, diagnostics=diagnostics)
