"""Benchmark toolkit for imputing gaps in motion-capture angle tensors."""

from .data import (
    DatasetManifest,
    NormalizationParams,
    denormalize,
    generate_synthetic_cohort,
    load_dataset,
    normalize,
    save_dataset,
)
from .harness import (
    Context,
    ExperimentGrid,
    ResultRecord,
    apply_imputation,
    calculate_mae,
    calculate_std_abs_err,
    run_experiment_grid,
)
from .imputers import ImputedMatrix, ImputerConfig, Method, impute
from .missingness import Mechanism, MissingnessSpec, apply_mask, find_local_extrema, generate_missing_mask
from .report import emit_report

__version__ = "0.1.0"

__all__ = [
    "Context", "DatasetManifest", "ExperimentGrid", "ImputedMatrix", "ImputerConfig", "Mechanism", "Method",
    "MissingnessSpec", "NormalizationParams", "ResultRecord", "apply_imputation", "apply_mask",
    "calculate_mae", "calculate_std_abs_err", "denormalize", "emit_report", "find_local_extrema",
    "generate_missing_mask", "generate_synthetic_cohort", "impute", "load_dataset", "normalize",
    "run_experiment_grid", "save_dataset",
]
