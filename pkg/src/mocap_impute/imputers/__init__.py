"""Imputers sharing one contract: NaN-masked matrix in, fully observed matrix out."""

from __future__ import annotations

import numpy as np

from .base import (
    MATRIX_METHODS,
    SCALE_SENSITIVE,
    ConfigError,
    DegenerateInputError,
    ImputedMatrix,
    ImputerConfig,
    Method,
    finish,
    mean_fill,
)
from .classical import (
    impute_iterative_regression,
    impute_iterative_svd,
    impute_knn,
    impute_simple_mean,
    impute_simple_median,
    impute_simple_random,
    impute_soft,
)
from .learned import BsiConfig, GainConfig, MlpParams, gain_generator_forward, gain_losses, impute_bsi, impute_gain

__all__ = [
    "MATRIX_METHODS", "SCALE_SENSITIVE", "BsiConfig", "ConfigError", "DegenerateInputError", "GainConfig",
    "ImputedMatrix", "ImputerConfig", "Method", "MlpParams", "finish", "gain_generator_forward", "gain_losses",
    "impute", "mean_fill",
]

IMPUTERS = {
    Method.SIMPLE_MEAN: impute_simple_mean,
    Method.SIMPLE_MEDIAN: impute_simple_median,
    Method.SIMPLE_RANDOM: impute_simple_random,
    Method.KNN: impute_knn,
    Method.SOFT_IMPUTE: impute_soft,
    Method.ITERATIVE_SVD: impute_iterative_svd,
    Method.ITERATIVE_IMPUTER: impute_iterative_regression,
    Method.BSI: impute_bsi,
    Method.GAIN: impute_gain,
}


def impute(m, config: ImputerConfig) -> ImputedMatrix:
    """Dispatch to the configured imputer.

    A single-column matrix (one univariate series) carries no cross-column
    signal, so the matrix methods reduce to the column-mean fill there.
    """
    m = np.asarray(m, dtype=float)
    if config.method in MATRIX_METHODS and m.ndim == 2 and m.shape[1] < 2:
        return finish(m, mean_fill(m), degenerate="single-column input, column-mean fill")
    return IMPUTERS[config.method](m, config)


__all__ = [
    "IMPUTERS",
    "MATRIX_METHODS",
    "SCALE_SENSITIVE",
    "BsiConfig",
    "ConfigError",
    "DegenerateInputError",
    "GainConfig",
    "ImputedMatrix",
    "ImputerConfig",
    "Method",
    "MlpParams",
    "gain_generator_forward",
    "gain_losses",
    "impute",
    "impute_bsi",
    "impute_gain",
    "impute_iterative_regression",
    "impute_iterative_svd",
    "impute_knn",
    "impute_simple_mean",
    "impute_simple_median",
    "impute_simple_random",
    "impute_soft",
]
