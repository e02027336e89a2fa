"""Context-aware imputation, accuracy metrics and the experiment grid runner."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np
from threadpoolctl import threadpool_limits

from .data import check_mask, check_tensor, denormalize, normalize
from .imputers import ImputerConfig, impute, mean_fill
from .missingness import Mechanism, MissingnessSpec, apply_mask, generate_missing_mask

DEFAULT_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)


class Context(str, Enum):
    UNIVARIATE = "univariate"
    MULTI_PLAYER = "multi-player"
    MULTI_ANGLE = "multi-angle"


class UndefinedMetricError(ValueError):
    """No masked entries to score."""


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary labels (independent of PYTHONHASHSEED)."""
    text = "\x1f".join(str(p.value if isinstance(p, Enum) else p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little") >> 1


def context_slices(context: Context, shape) -> Iterator[tuple]:
    """Index expressions that cut a ``(P, T, A)`` tensor into the context's matrices.

    univariate:   P*A series, each a ``T x 1`` matrix
    multi-player: A matrices of shape ``P x T``
    multi-angle:  P matrices of shape ``T x A``
    """
    P, T, A = shape
    context = Context(context)
    if context is Context.UNIVARIATE:
        for p in range(P):
            for a in range(A):
                yield (p, slice(None), slice(a, a + 1))
    elif context is Context.MULTI_PLAYER:
        for a in range(A):
            yield (slice(None), slice(None), a)
    else:
        for p in range(P):
            yield (p, slice(None), slice(None))


def apply_imputation(tensor, mask, imputer: ImputerConfig, context: Context, slice_log: list | None = None):
    """Mask ``tensor``, impute it slice by slice within ``context`` and reassemble.

    Scale-sensitive imputers work on per-angle min-max normalized values
    (statistics from observed entries only) and are mapped back afterwards.
    A slice whose imputer raises is filled with column means instead; the
    error is appended to ``slice_log`` if one is given.
    """
    tensor = check_tensor(tensor)
    mask = check_mask(mask, tensor.shape)
    work = apply_mask(tensor, mask)
    params = None
    if imputer.scale_sensitive:
        work, params = normalize(work, mask)

    out = work.copy()
    for i, idx in enumerate(context_slices(context, tensor.shape)):
        m = work[idx]
        cfg = imputer.with_seed(derive_seed(imputer.seed, i))
        error = None
        try:
            res = impute(m, cfg)
            filled, diagnostics = res.values, res.diagnostics
        except Exception as exc:  # noqa: BLE001 - any slice failure degrades to a mean fill
            error = f"{type(exc).__name__}: {exc}"
            filled, diagnostics = mean_fill(m), {}
        out[idx] = filled
        if slice_log is not None:
            slice_log.append({"slice": i, "error": error, "diagnostics": diagnostics})

    if params is not None:
        out = denormalize(out, params)
    # observed cells come straight from the source, bit for bit
    return np.where(mask == 1, out, tensor)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def _abs_errors(truth, imputed, mask) -> np.ndarray:
    truth = np.asarray(truth, dtype=float)
    imputed = np.asarray(imputed, dtype=float)
    mask = np.asarray(mask)
    if truth.shape != imputed.shape or truth.shape != mask.shape:
        raise ValueError(f"shape mismatch: {truth.shape}, {imputed.shape}, {mask.shape}")
    if mask.sum() == 0:
        raise UndefinedMetricError("no masked entries to score")
    return np.abs(truth - imputed)[mask == 1]


def calculate_mae(truth, imputed, mask) -> float:
    """Mean absolute error over masked cells."""
    return float(_abs_errors(truth, imputed, mask).mean())


def calculate_std_abs_err(truth, imputed, mask) -> float:
    """Population standard deviation of the absolute errors over masked cells."""
    return float(_abs_errors(truth, imputed, mask).std())


def _grouped_mae(truth, imputed, mask, axis_keep: int) -> list[float]:
    err = np.abs(truth - imputed) * (mask == 1)
    axes = tuple(ax for ax in range(3) if ax != axis_keep)
    counts = (mask == 1).sum(axis=axes)
    with np.errstate(invalid="ignore"):
        return list(np.where(counts > 0, err.sum(axis=axes) / np.maximum(counts, 1), np.nan))


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------


@dataclass
class ExperimentGrid:
    methods: list[ImputerConfig]
    mechanisms: list[Mechanism] = field(default_factory=lambda: list(Mechanism))
    fractions: list[float] = field(default_factory=lambda: list(DEFAULT_FRACTIONS))
    contexts: list[Context] = field(default_factory=lambda: list(Context))
    base_seed: int = 0
    workers: int = 1
    num_blocks: int = 3

    def __post_init__(self):
        self.methods = [m if isinstance(m, ImputerConfig) else ImputerConfig.from_dict(m) for m in self.methods]
        self.mechanisms = [Mechanism(m) for m in self.mechanisms]
        self.contexts = [Context(c) for c in self.contexts]
        self.fractions = [float(f) for f in self.fractions]
        if not (self.methods and self.mechanisms and self.fractions and self.contexts):
            raise ValueError("every grid axis needs at least one entry")
        if any(not 0 < f <= 1 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError(f"method names must be unique, got {names}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def __len__(self) -> int:
        return len(self.methods) * len(self.mechanisms) * len(self.fractions) * len(self.contexts)

    def cells(self):
        """Cells in canonical order: methods, mechanisms, fractions, contexts."""
        for method in self.methods:
            for mech in self.mechanisms:
                for frac in self.fractions:
                    for ctx in self.contexts:
                        yield method, mech, frac, ctx

    def mask_spec(self, mechanism: Mechanism, fraction: float) -> MissingnessSpec:
        # one mask per (mechanism, fraction): every method and context sees the same holes
        return MissingnessSpec(mechanism, fraction, self.num_blocks, derive_seed(self.base_seed, mechanism, fraction))

    def cell_seed(self, method: ImputerConfig, mechanism, fraction, context) -> int:
        return derive_seed(self.base_seed, method.name, mechanism, fraction, context)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentGrid":
        return cls(
            methods=[ImputerConfig.from_dict(m) for m in d["methods"]],
            mechanisms=d.get("mechanisms", [m.value for m in Mechanism]),
            fractions=d.get("fractions", list(DEFAULT_FRACTIONS)),
            contexts=d.get("contexts", [c.value for c in Context]),
            base_seed=int(d.get("base_seed", 0)),
            workers=int(d.get("workers", 1)),
            num_blocks=int(d.get("num_blocks", 3)),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentGrid":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "methods": [m.to_dict() for m in self.methods],
            "mechanisms": [m.value for m in self.mechanisms],
            "fractions": self.fractions,
            "contexts": [c.value for c in self.contexts],
            "base_seed": self.base_seed,
            "workers": self.workers,
            "num_blocks": self.num_blocks,
        }


@dataclass
class ResultRecord:
    method: str
    mechanism: str
    fraction: float
    context: str
    mae: float
    std_abs_err: float
    n_missing: int
    runtime_ms: int
    seed: int
    error_note: str = ""
    per_angle_mae: list[float] = field(default_factory=list)
    per_player_mae: list[float] = field(default_factory=list)
    passthrough_ok: bool = True
    imputed: np.ndarray | None = field(default=None, repr=False)
    slice_log: list | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple:
        return (self.method, self.mechanism, self.fraction, self.context)

    @property
    def degraded(self) -> bool:
        return bool(self.error_note)


def run_cell(tensor, mask, config: ImputerConfig, mechanism, fraction, context, seed: int,
             retain: bool = False, keep_log: bool = False) -> ResultRecord:
    """Impute one grid cell and score it."""
    config = config.with_seed(seed)
    log: list = []
    base = dict(method=config.name, mechanism=Mechanism(mechanism).value, fraction=fraction,
                context=Context(context).value, n_missing=int(mask.sum()), seed=seed)
    # single-threaded BLAS keeps results identical however many workers run
    with threadpool_limits(limits=1):
        start = time.perf_counter()
        try:
            imputed = apply_imputation(tensor, mask, config, context, log)
        except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the grid
            runtime_ms = int(round((time.perf_counter() - start) * 1000))
            return ResultRecord(mae=float("nan"), std_abs_err=float("nan"), runtime_ms=runtime_ms,
                                error_note=f"failed: {type(exc).__name__}: {exc}", passthrough_ok=False, **base)
        runtime_ms = int(round((time.perf_counter() - start) * 1000))

    failures = [entry for entry in log if entry["error"]]
    note = ""
    if failures:
        note = f"degraded: {len(failures)} slice(s) fell back to column means; first: {failures[0]['error']}"
    observed = mask == 0
    return ResultRecord(
        mae=calculate_mae(tensor, imputed, mask),
        std_abs_err=calculate_std_abs_err(tensor, imputed, mask),
        runtime_ms=runtime_ms,
        error_note=note,
        per_angle_mae=_grouped_mae(tensor, imputed, mask, 2),
        per_player_mae=_grouped_mae(tensor, imputed, mask, 0),
        passthrough_ok=bool(np.array_equal(imputed[observed], tensor[observed])),
        imputed=imputed if retain else None,
        slice_log=log if keep_log else None,
        **base,
    )


def _run_cell_task(args):
    return run_cell(*args)


def run_experiment_grid(tensor, grid: ExperimentGrid, workers: int | None = None,
                        retain: bool = False, keep_log: bool = False) -> list[ResultRecord]:
    """Run every grid cell and return records in canonical cell order.

    Cells are independent; with ``workers > 1`` they run in a process pool.
    Results do not depend on the worker count.
    """
    tensor = check_tensor(tensor)
    if np.isnan(tensor).any():
        raise ValueError("the experiment grid needs a complete source tensor")
    workers = workers or grid.workers

    masks = {}
    for mech in grid.mechanisms:
        for frac in grid.fractions:
            masks[mech, frac] = generate_missing_mask(tensor, grid.mask_spec(mech, frac))

    tasks = [
        (tensor, masks[mech, frac], cfg, mech, frac, ctx, grid.cell_seed(cfg, mech, frac, ctx), retain, keep_log)
        for cfg, mech, frac, ctx in grid.cells()
    ]
    if workers == 1:
        return [_run_cell_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map() yields in submission order regardless of completion order
        return list(pool.map(_run_cell_task, tasks, chunksize=1))
