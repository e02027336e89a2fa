"""Motion tensors, dataset file I/O, min-max normalization and a synthetic cohort.

A motion tensor is a plain ``float64`` array of shape ``(P, T, A)``: players,
time steps, kinematic angles (degrees). Missing entries are NaN. A mask tensor
is a ``uint8`` array of the same shape where 1 flags an artificially removed
entry.

On disk a dataset is a directory holding ``data.csv`` (long format,
``player,time,angle,value``) and ``manifest.json``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

DATA_FILE = "data.csv"
MANIFEST_FILE = "manifest.json"
CSV_HEADER = ["player", "time", "angle", "value"]


class DatasetError(ValueError):
    """Malformed dataset file."""


class DimensionError(ValueError):
    """Array extents disagree with each other or with a manifest."""


class DegenerateAngleError(ValueError):
    """An angle has no observed entry, so it cannot be normalized."""


@dataclass
class DatasetManifest:
    name: str
    P: int
    T: int
    A: int
    angles: list[str]
    players: list[str]
    provenance: str = ""

    def __post_init__(self):
        if len(self.angles) != self.A or len(self.players) != self.P:
            raise DimensionError(
                f"manifest label counts ({len(self.players)} players, "
                f"{len(self.angles)} angles) do not match dims ({self.P}, {self.T}, {self.A})"
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.P, self.T, self.A)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            name=d["name"],
            P=int(d["P"]),
            T=int(d["T"]),
            A=int(d["A"]),
            angles=list(d["angles"]),
            players=list(d["players"]),
            provenance=d.get("provenance", ""),
        )

    @classmethod
    def default(cls, dims, name="unnamed", provenance="") -> "DatasetManifest":
        P, T, A = dims
        return cls(
            name=name,
            P=P,
            T=T,
            A=A,
            angles=[f"angle_{a:02d}" for a in range(A)],
            players=[f"p{p}" for p in range(P)],
            provenance=provenance,
        )


def check_tensor(tensor: np.ndarray) -> np.ndarray:
    """Return ``tensor`` as a float array after checking it is a valid motion tensor."""
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim != 3:
        raise DimensionError(f"motion tensor must be 3-D, got shape {tensor.shape}")
    P, T, A = tensor.shape
    if P < 1 or T < 2 or A < 1:
        raise DimensionError(f"motion tensor needs P>=1, T>=2, A>=1, got {tensor.shape}")
    return tensor


def check_mask(mask: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != tuple(shape):
        raise DimensionError(f"mask shape {mask.shape} does not match tensor shape {tuple(shape)}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask entries must be 0 or 1")
    return mask.astype(np.uint8)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------


def _format_value(v: float) -> str:
    # repr() of a Python float round-trips bit-exactly
    return "" if math.isnan(v) else repr(float(v))


def save_dataset(tensor: np.ndarray, manifest: DatasetManifest, path) -> None:
    """Write ``tensor`` and ``manifest`` into the dataset directory ``path``."""
    tensor = check_tensor(tensor)
    if tensor.shape != manifest.dims:
        raise DimensionError(f"tensor shape {tensor.shape} does not match manifest dims {manifest.dims}")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_long_csv(path / DATA_FILE, tensor, manifest, _format_value)
    (path / MANIFEST_FILE).write_text(manifest.to_json() + "\n", encoding="utf-8")


def write_long_csv(file, tensor, manifest: DatasetManifest, fmt) -> None:
    P, T, A = tensor.shape
    with open(file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in range(P):
            for t in range(T):
                for a in range(A):
                    writer.writerow([manifest.players[p], t, manifest.angles[a], fmt(tensor[p, t, a])])


def read_long_csv(file, manifest: DatasetManifest | None = None):
    """Parse a long-format CSV into a ``(P, T, A)`` array.

    Without a manifest, player and angle labels are ordered by first
    appearance and ``T`` is one past the largest time index.
    """
    rows = []
    with open(file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise DatasetError(f"{file}: line 1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DatasetError(f"{file}: line {lineno}: expected 4 fields, got {len(row)}")
            player, time, angle, value = (c.strip() for c in row)
            try:
                t = int(time)
            except ValueError:
                raise DatasetError(f"{file}: line {lineno}: time {time!r} is not an integer") from None
            if value == "" or value.lower() == "nan":
                v = math.nan
            else:
                try:
                    v = float(value)
                except ValueError:
                    raise DatasetError(f"{file}: line {lineno}: value {value!r} is not a number") from None
            rows.append((lineno, player, t, angle, v))

    if manifest is not None:
        players, angles, T = list(manifest.players), list(manifest.angles), manifest.T
    else:
        players = list(dict.fromkeys(r[1] for r in rows))
        angles = list(dict.fromkeys(r[3] for r in rows))
        T = max((r[2] for r in rows), default=-1) + 1
    p_index = {name: i for i, name in enumerate(players)}
    a_index = {name: i for i, name in enumerate(angles)}

    P, A = len(players), len(angles)
    out = np.full((P, T, A), np.nan)
    seen = np.zeros((P, T, A), dtype=bool)
    for lineno, player, t, angle, v in rows:
        if player not in p_index or angle not in a_index or not 0 <= t < T:
            raise DimensionError(f"{file}: line {lineno}: index ({player}, {t}, {angle}) outside dataset dims")
        idx = (p_index[player], t, a_index[angle])
        if seen[idx]:
            raise DimensionError(f"{file}: line {lineno}: duplicate index ({player}, {t}, {angle})")
        seen[idx] = True
        out[idx] = v
    if not seen.all():
        p, t, a = np.argwhere(~seen)[0]
        raise DimensionError(
            f"{file}: missing row for index ({players[p]}, {t}, {angles[a]}); "
            f"expected exactly {P * T * A} rows, got {len(rows)}"
        )
    return out, players, angles


def load_dataset(path) -> tuple[np.ndarray, DatasetManifest]:
    """Load a dataset directory (or a bare CSV file) into ``(tensor, manifest)``."""
    path = Path(path)
    if path.is_dir():
        csv_file, manifest_file = path / DATA_FILE, path / MANIFEST_FILE
    else:
        csv_file, manifest_file = path, path.with_name(MANIFEST_FILE)
    if not csv_file.exists():
        raise FileNotFoundError(csv_file)

    manifest = None
    if manifest_file.exists():
        manifest = DatasetManifest.from_dict(json.loads(manifest_file.read_text(encoding="utf-8")))
    tensor, players, angles = read_long_csv(csv_file, manifest)
    if manifest is None:
        manifest = DatasetManifest(
            name=csv_file.stem, P=len(players), T=tensor.shape[1], A=len(angles),
            angles=angles, players=players, provenance=str(csv_file),
        )
    check_tensor(tensor)
    return tensor, manifest


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


@dataclass
class NormalizationParams:
    min: np.ndarray
    max: np.ndarray
    epsilon: float = 1e-6

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=float)
        self.max = np.asarray(self.max, dtype=float)
        if self.min.shape != self.max.shape:
            raise DimensionError("min and max must have the same length")
        if np.any(self.min > self.max):
            raise ValueError("min must not exceed max")

    @property
    def scale(self) -> np.ndarray:
        return self.max - self.min + self.epsilon


def normalize(tensor: np.ndarray, mask: np.ndarray | None = None, epsilon: float = 1e-6):
    """Per-angle min-max scaling using observed entries only.

    Entries flagged by ``mask`` (and any NaN) are ignored when computing the
    per-angle minimum and maximum. Returns ``(scaled, params)``; masked
    entries are carried through the same affine map (NaN stays NaN).
    """
    tensor = check_tensor(tensor)
    observed = ~np.isnan(tensor)
    if mask is not None:
        observed &= check_mask(mask, tensor.shape) == 0
    A = tensor.shape[2]
    lo = np.empty(A)
    hi = np.empty(A)
    for a in range(A):
        vals = tensor[:, :, a][observed[:, :, a]]
        if vals.size == 0:
            raise DegenerateAngleError(f"angle {a} has no observed entries")
        lo[a], hi[a] = vals.min(), vals.max()
    params = NormalizationParams(lo, hi, epsilon)
    return (tensor - lo) / params.scale, params


def denormalize(tensor: np.ndarray, params: NormalizationParams) -> np.ndarray:
    tensor = check_tensor(tensor)
    if tensor.shape[2] != params.min.shape[0]:
        raise DimensionError(
            f"normalization params cover {params.min.shape[0]} angles, tensor has {tensor.shape[2]}"
        )
    return tensor * params.scale + params.min


# ---------------------------------------------------------------------------
# Synthetic cohort
# ---------------------------------------------------------------------------


def generate_synthetic_cohort(
    P: int = 10,
    T: int = 100,
    A: int = 8,
    seed: int = 0,
    coupling: float = 0.5,
    cohort_noise: float = 0.05,
    value_range: tuple[float, float] = (-90.0, 180.0),
) -> tuple[np.ndarray, DatasetManifest]:
    """Sinusoid-template cohort standing in for a recorded skill dataset.

    Every angle gets a template built from 2-4 sinusoids (0.5 to 3 cycles per
    window, distinct phases). Each player is an amplitude/phase-jittered copy
    of the templates, with jitter proportional to ``cohort_noise``. Angles are
    then blended with a fixed positive mixing matrix with weight ``coupling``,
    and each angle is placed at its own offset and span inside
    ``value_range``.
    """
    if P < 2 or T < 16 or A < 2:
        raise DimensionError(f"synthetic cohort needs P>=2, T>=16, A>=2, got ({P}, {T}, {A})")
    if not 0.0 <= coupling <= 1.0:
        raise ValueError("coupling must lie in [0, 1]")
    if cohort_noise < 0:
        raise ValueError("cohort_noise must be non-negative")

    rng = np.random.default_rng(seed)
    t = np.arange(T) / T

    n_comp = rng.integers(2, 5, size=A)
    freqs = np.zeros((A, 4))
    amps = np.zeros((A, 4))
    phases = np.zeros((A, 4))
    for a in range(A):
        k = n_comp[a]
        freqs[a, :k] = np.sort(rng.choice(np.arange(1, 7), size=k, replace=False)) * 0.5
        amps[a, :k] = rng.uniform(0.4, 1.0, size=k) / np.arange(1, k + 1)
        phases[a, :k] = (rng.permutation(k) + rng.uniform(0, 1, size=k)) * (2 * np.pi / k)

    amp_jitter = 1.0 + cohort_noise * rng.standard_normal((P, A, 4))
    phase_jitter = np.pi * cohort_noise * rng.standard_normal((P, A, 4))

    # (P, T, A, comp)
    arg = 2 * np.pi * freqs[None, None] * t[None, :, None, None] + phases[None, None] + phase_jitter[:, None]
    sources = (amps[None, None] * amp_jitter[:, None] * np.sin(arg)).sum(axis=-1)
    template = (amps[None] * np.sin(2 * np.pi * freqs[None] * t[:, None, None] + phases[None])).sum(axis=-1)

    mixing = rng.uniform(0.2, 1.0, size=(A, A))
    mixing /= mixing.sum(axis=0, keepdims=True)
    blend = (1 - coupling) * np.eye(A) + coupling * mixing
    mixed = sources @ blend
    template = template @ blend

    # per-angle placement uses the jitter-free template so players share one map
    lo, hi = value_range
    spans = rng.uniform(0.15, 0.45, size=A) * (hi - lo)
    centers = lo + spans / 2 + rng.uniform(0, 1, size=A) * (hi - lo - spans)
    t_center = template.mean(axis=0)
    t_half = np.maximum(np.abs(template - t_center).max(axis=0), 1e-12)
    values = centers + (mixed - t_center) / t_half * (spans / 2)

    manifest = DatasetManifest.default(
        (P, T, A),
        name=f"synthetic-{P}x{T}x{A}-seed{seed}",
        provenance=f"generate_synthetic_cohort(seed={seed}, coupling={coupling}, cohort_noise={cohort_noise})",
    )
    return values, manifest
