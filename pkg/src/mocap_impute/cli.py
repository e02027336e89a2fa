"""Command line entry point: ``mocap-impute gen-data | mask | impute | bench``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 grid finished with
degraded or failed cells.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .data import DatasetError, DimensionError, generate_synthetic_cohort, load_dataset, read_long_csv, save_dataset, write_long_csv
from .harness import Context, ExperimentGrid, apply_imputation, calculate_mae, calculate_std_abs_err, run_experiment_grid
from .imputers import ConfigError, ImputerConfig
from .missingness import MissingnessSpec, MissingnessSpecError, generate_missing_mask
from .report import emit_report

log = logging.getLogger("mocap_impute")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mocap-impute", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write a synthetic cohort dataset")
    p.add_argument("--players", type=int, default=10)
    p.add_argument("--timesteps", type=int, default=100)
    p.add_argument("--angles", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coupling", type=float, default=0.5)
    p.add_argument("--cohort-noise", type=float, default=0.05)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mask", help="generate a missingness mask for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--mechanism", choices=["mcar", "transition", "block"], required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("impute", help="impute a masked dataset with one method")
    p.add_argument("--data", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--method")
    p.add_argument("--context", choices=[c.value for c in Context], required=True)
    p.add_argument("--config", help="JSON file with an ImputerConfig under key 'imputer'")
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run an experiment grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", action="store_true", help="export BSI/GAIN loss traces")
    p.add_argument("--record-runtime", action="store_true",
                   help="fill results.csv runtime_ms (makes the file timing-dependent)")
    p.add_argument("--svg", action="store_true", help="also draw heatmap SVGs")
    return parser


def cmd_gen_data(args) -> int:
    tensor, manifest = generate_synthetic_cohort(
        args.players, args.timesteps, args.angles, args.seed, args.coupling, args.cohort_noise
    )
    save_dataset(tensor, manifest, args.out)
    log.info("wrote %s with dims %s", args.out, manifest.dims)
    return EXIT_OK


def cmd_mask(args) -> int:
    tensor, manifest = load_dataset(args.data)
    spec = MissingnessSpec(args.mechanism, args.fraction, args.blocks, args.seed)
    mask = generate_missing_mask(tensor, spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_long_csv(out, mask, manifest, lambda v: str(int(v)))
    out.with_suffix(".spec.json").write_text(spec.to_json() + "\n", encoding="utf-8")
    return EXIT_OK


def load_mask(path, manifest) -> np.ndarray:
    mask, _, _ = read_long_csv(path, manifest)
    if np.isnan(mask).any() or not np.isin(mask, (0, 1)).all():
        raise DatasetError(f"{path}: mask values must be 0 or 1")
    return mask.astype(np.uint8)


def cmd_impute(args) -> int:
    if args.config:
        config = ImputerConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
        if args.method and args.method != config.method.value:
            raise UsageError(f"--method {args.method} disagrees with config method {config.method.value}")
    elif args.method:
        config = ImputerConfig(args.method)
    else:
        raise UsageError("impute needs --method or --config")

    tensor, manifest = load_dataset(args.data)
    if np.isnan(tensor).any():
        raise DatasetError("impute needs a complete source dataset; missingness comes from --mask")
    mask = load_mask(args.mask, manifest)
    slice_log: list = []
    imputed = apply_imputation(tensor, mask, config, Context(args.context), slice_log)
    save_dataset(imputed, manifest, args.out)
    failures = [e for e in slice_log if e["error"]]
    summary = {
        "method": config.name,
        "context": args.context,
        "n_missing": int(mask.sum()),
        "mae": calculate_mae(tensor, imputed, mask) if mask.any() else None,
        "std_abs_err": calculate_std_abs_err(tensor, imputed, mask) if mask.any() else None,
        "degraded_slices": len(failures),
    }
    (Path(args.out) / "metrics.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary))
    return EXIT_PARTIAL if failures else EXIT_OK


def write_traces(records, out_dir: Path) -> None:
    for r in records:
        for entry in r.slice_log or []:
            trace = entry["diagnostics"].get("loss_trace")
            if not trace:
                continue
            cell = out_dir / "traces" / f"{r.method}_{r.mechanism}_{r.fraction:g}_{r.context}"
            cell.mkdir(parents=True, exist_ok=True)
            with open(cell / f"slice_{entry['slice']:04d}.csv", "w", encoding="utf-8") as fh:
                if isinstance(trace[0], tuple):
                    fh.write("step,loss_d,loss_g\n")
                    fh.writelines(f"{i},{d!r},{g!r}\n" for i, (d, g) in enumerate(trace))
                else:
                    fh.write("step,loss\n")
                    fh.writelines(f"{i},{v!r}\n" for i, v in enumerate(trace))


def cmd_bench(args) -> int:
    grid = ExperimentGrid.from_json(Path(args.grid).read_text(encoding="utf-8"))
    tensor, manifest = load_dataset(args.data)
    workers = args.workers or grid.workers
    records = run_experiment_grid(tensor, grid, workers=workers, keep_log=args.trace)
    out = Path(args.out)
    emit_report(records, out, manifest.angles, include_runtime=args.record_runtime, svg=args.svg)
    if args.trace:
        write_traces(records, out)
    degraded = sum(r.degraded for r in records)
    log.info("%d cells, %d degraded", len(records), degraded)
    return EXIT_PARTIAL if degraded else EXIT_OK


COMMANDS = {"gen-data": cmd_gen_data, "mask": cmd_mask, "impute": cmd_impute, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, MissingnessSpecError) as exc:
        print(f"mocap-impute: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, DimensionError, FileNotFoundError, ValueError) as exc:
        print(f"mocap-impute: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
