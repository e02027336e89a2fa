"""Write grid results as CSV tables: flat records, per-angle heatmaps, error bars."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

from .harness import ResultRecord

RESULTS_HEADER = [
    "method", "mechanism", "fraction", "context", "mae", "std_abs_err",
    "n_missing", "runtime_ms", "seed", "error_note",
]


def fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _slug(*parts) -> str:
    return "_".join(str(p).replace("-", "") for p in parts)


def emit_report(records: list[ResultRecord], out_dir, angle_labels=None,
                include_runtime: bool = False, svg: bool = False) -> dict[str, Path]:
    """Write the report files into ``out_dir`` and return their paths by role.

    ``results.csv`` leaves ``runtime_ms`` empty unless ``include_runtime`` is
    set, so the file is reproducible byte for byte; wall times always go to
    ``timings.csv``.
    """
    if not records:
        raise ValueError("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}

    path = out / "results.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in records:
            w.writerow([
                r.method, r.mechanism, fmt(r.fraction), r.context, fmt(r.mae), fmt(r.std_abs_err),
                r.n_missing, r.runtime_ms if include_runtime else "", r.seed, r.error_note,
            ])
    written["results"] = path

    path = out / "timings.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "mechanism", "fraction", "context", "runtime_ms"])
        for r in records:
            w.writerow([r.method, r.mechanism, fmt(r.fraction), r.context, r.runtime_ms])
    written["timings"] = path

    groups = defaultdict(list)
    for r in records:
        groups[r.mechanism, r.context].append(r)

    heat_dir = out / "heatmaps"
    bar_dir = out / "errorbars"
    heat_dir.mkdir(exist_ok=True)
    bar_dir.mkdir(exist_ok=True)
    for (mech, ctx), rows in groups.items():
        n_angles = max(len(r.per_angle_mae) for r in rows)
        labels = list(angle_labels) if angle_labels is not None else [f"angle_{a:02d}" for a in range(n_angles)]
        path = heat_dir / f"heatmap_{_slug(mech, ctx)}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "fraction", *labels])
            for r in rows:
                cells = r.per_angle_mae or [float("nan")] * n_angles
                w.writerow([r.method, fmt(r.fraction), *(fmt(float(v)) for v in cells)])
        written[f"heatmap:{mech}:{ctx}"] = path

        path = bar_dir / f"errorbar_{_slug(mech, ctx)}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "fraction", "mae", "std_abs_err"])
            for r in rows:
                w.writerow([r.method, fmt(r.fraction), fmt(r.mae), fmt(r.std_abs_err)])
        written[f"errorbar:{mech}:{ctx}"] = path

        if svg:
            try:
                written[f"svg:{mech}:{ctx}"] = _heatmap_svg(rows, labels, heat_dir / f"heatmap_{_slug(mech, ctx)}.svg")
            except Exception:  # noqa: BLE001 - figures are optional extras
                pass
    return written


def _heatmap_svg(rows, labels, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    grid = np.array([[float(v) for v in r.per_angle_mae] for r in rows])
    fig, ax = plt.subplots(figsize=(max(6, 0.3 * len(labels)), max(3, 0.25 * len(rows))))
    im = ax.imshow(grid, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(labels)), labels, rotation=90, fontsize=6)
    ax.set_yticks(range(len(rows)), [f"{r.method} {r.fraction:.2f}" for r in rows], fontsize=6)
    fig.colorbar(im, ax=ax, label="MAE")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
