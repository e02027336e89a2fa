import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mocap_impute import generate_synthetic_cohort, harness
from mocap_impute.harness import (
    Context,
    ExperimentGrid,
    UndefinedMetricError,
    apply_imputation,
    calculate_mae,
    calculate_std_abs_err,
    derive_seed,
    run_cell,
    run_experiment_grid,
)
from mocap_impute.imputers import ImputerConfig, impute
from mocap_impute.missingness import MissingnessSpec, generate_missing_mask
from mocap_impute.report import RESULTS_HEADER, emit_report

ALL_METHODS = ["SimpleMean", "SimpleMedian", "SimpleRandom", "KNN", "SoftImpute",
               "IterativeSVD", "IterativeImputer", "BSI", "GAIN"]
QUICK = {"BSI": {"steps": 2, "n_pairs": 1}, "GAIN": {"steps": 5}}


def quick(method, seed=0):
    return ImputerConfig(method, QUICK.get(method, {}), seed=seed)


@pytest.fixture
def calls(monkeypatch):
    shapes = []

    def counting(m, config):
        shapes.append(m.shape)
        return impute(m, config)

    monkeypatch.setattr(harness, "impute", counting)
    return shapes


# --- dispatch --------------------------------------------------------------


def sines(P, T, A):
    t = np.arange(T)
    return np.stack([[np.sin(2 * np.pi * t / 25 + p + a) * 30 + 10 * a for a in range(A)] for p in range(P)]).transpose(0, 2, 1)


def test_univariate_invocations(calls):
    x = sines(2, 10, 3)
    mask = generate_missing_mask(x, MissingnessSpec("mcar", 0.2, seed=0))
    apply_imputation(x, mask, ImputerConfig("SimpleMean"), Context.UNIVARIATE)
    assert calls == [(10, 1)] * 6


def test_multi_angle_invocation(calls):
    x = sines(1, 100, 39)
    mask = generate_missing_mask(x, MissingnessSpec("mcar", 0.1, seed=0))
    apply_imputation(x, mask, ImputerConfig("SimpleMean"), Context.MULTI_ANGLE)
    assert calls == [(100, 39)]


def test_multi_player_invocations(calls):
    x, _ = generate_synthetic_cohort(3, 20, 4, seed=0)
    mask = generate_missing_mask(x, MissingnessSpec("mcar", 0.1, seed=0))
    apply_imputation(x, mask, ImputerConfig("SimpleMean"), Context.MULTI_PLAYER)
    assert calls == [(3, 20)] * 4


@pytest.mark.parametrize("context", list(Context))
@pytest.mark.parametrize("method", ALL_METHODS)
def test_zero_mask_is_identity(cohort, method, context):
    x = cohort[0][:3, :30, :4]
    out = apply_imputation(x, np.zeros(x.shape, np.uint8), quick(method), context)
    assert out.tobytes() == x.tobytes()


def test_failing_slice_degrades(monkeypatch):
    x = sines(2, 10, 2)
    mask = generate_missing_mask(x, MissingnessSpec("mcar", 0.3, seed=0))

    def flaky(m, config):
        raise RuntimeError("boom")

    monkeypatch.setattr(harness, "impute", flaky)
    log = []
    out = apply_imputation(x, mask, ImputerConfig("KNN"), Context.MULTI_PLAYER, log)
    assert np.isfinite(out).all()
    assert [e["error"] for e in log] == ["RuntimeError: boom"] * 2
    rec = run_cell(x, mask, ImputerConfig("KNN"), "mcar", 0.3, "multi-player", 1)
    assert rec.degraded and rec.error_note.startswith("degraded: 2 slice(s)")


# --- metrics ---------------------------------------------------------------


def test_mae_examples():
    assert calculate_mae([1, 2, 3], [1, 5, 3], [0, 1, 0]) == 3.0
    x = np.arange(6.0)
    assert calculate_mae(x, x, np.ones(6)) == 0.0


def test_std_examples():
    assert calculate_std_abs_err([1, 2, 3], [1, 5, 3], [0, 1, 0]) == 0.0
    assert calculate_std_abs_err([0, 0], [1, -3], [1, 1]) == 1.0


def test_metrics_need_masked_cells():
    with pytest.raises(UndefinedMetricError):
        calculate_mae([1.0], [2.0], [0])
    with pytest.raises(UndefinedMetricError):
        calculate_std_abs_err([1.0], [2.0], [0])


def brute_metrics(x, y, m):
    total, count = 0.0, 0
    P, T, A = x.shape
    for p in range(P):
        for t in range(T):
            for a in range(A):
                if m[p, t, a]:
                    total += abs(x[p, t, a] - y[p, t, a])
                    count += 1
    mae = total / count
    var = 0.0
    for p in range(P):
        for t in range(T):
            for a in range(A):
                if m[p, t, a]:
                    var += (abs(x[p, t, a] - y[p, t, a]) - mae) ** 2
    return mae, (var / count) ** 0.5


def test_metrics_against_brute_force(rng):
    for _ in range(1000):
        shape = tuple(rng.integers(1, 5, size=3))
        x = rng.normal(size=shape) * 50
        y = x + rng.normal(size=shape) * 5
        m = (rng.random(shape) < 0.4).astype(np.uint8)
        m.flat[rng.integers(m.size)] = 1
        mae, std = brute_metrics(x, y, m)
        assert abs(calculate_mae(x, y, m) - mae) <= 1e-12 * max(1.0, mae)
        assert abs(calculate_std_abs_err(x, y, m) - std) <= 1e-12 * max(1.0, std)


# --- grid ------------------------------------------------------------------


def test_grid_json_roundtrip():
    grid = ExperimentGrid([ImputerConfig("KNN", {"K": 3})], ["block"], [0.1], ["univariate"], base_seed=5)
    assert ExperimentGrid.from_json(json.dumps(grid.to_dict())).to_dict() == grid.to_dict()
    assert len(ExperimentGrid([ImputerConfig(m) for m in ALL_METHODS[:8]])) == 432


@pytest.mark.parametrize("kwargs", [
    {"methods": []},
    {"methods": [ImputerConfig("KNN")], "fractions": [0.0]},
    {"methods": [ImputerConfig("KNN")], "fractions": [1.5]},
    {"methods": [ImputerConfig("KNN"), ImputerConfig("KNN")]},
    {"methods": [ImputerConfig("KNN")], "workers": 0},
])
def test_grid_rejects(kwargs):
    with pytest.raises(ValueError):
        ExperimentGrid(**kwargs)


def test_derive_seed_is_stable():
    assert derive_seed(0, "KNN", "mcar", 0.1, "univariate") == derive_seed(0, "KNN", "mcar", 0.1, Context.UNIVARIATE)
    assert derive_seed(0, "a") != derive_seed(1, "a")
    assert 0 <= derive_seed("x") < 2**63


@pytest.mark.parametrize("fraction", [0.05, 0.17, 0.3])
def test_single_cell_counts(cohort, fraction):
    x = cohort[0]
    P, T, A = x.shape
    grid = ExperimentGrid([ImputerConfig("SimpleMean")], ["transition"], [fraction], ["univariate"])
    records = run_experiment_grid(x, grid)
    assert len(records) == 1
    assert records[0].n_missing == P * A * int(fraction * T)


def test_pairing_and_pass_through(cohort):
    x = cohort[0][:4, :50, :3]
    grid = ExperimentGrid([quick("SimpleMean"), quick("KNN"), quick("GAIN")], ["block", "mcar"], [0.1, 0.2])
    records = run_experiment_grid(x, grid, retain=True)
    assert len(records) == len(grid) == 36
    by_mask = {}
    for r in records:
        holes = np.isnan(r.imputed) | (r.imputed != x)
        assert r.passthrough_ok
        assert np.isfinite(r.imputed).all()
        expected = generate_missing_mask(x, grid.mask_spec(r.mechanism, r.fraction))
        assert not (holes & (expected == 0)).any()
        by_mask.setdefault((r.mechanism, r.fraction), set()).add(r.n_missing)
        assert r.mae == pytest.approx(calculate_mae(x, r.imputed, expected), abs=0)
    assert all(len(v) == 1 for v in by_mask.values())


def test_records_in_canonical_order(cohort):
    x = cohort[0][:3, :40, :2]
    grid = ExperimentGrid([quick("SimpleMedian"), quick("SimpleMean")], ["mcar", "block"], [0.2, 0.1])
    keys = [r.key for r in run_experiment_grid(x, grid)]
    assert keys == [(m.name, mech.value, f, c.value) for m, mech, f, c in grid.cells()]


def test_worker_count_does_not_change_results(cohort):
    x = cohort[0][:4, :40, :3]
    grid = ExperimentGrid([quick("SimpleRandom"), quick("BSI"), quick("GAIN")], ["transition"], [0.1, 0.25])
    one = run_experiment_grid(x, grid, workers=1)
    three = run_experiment_grid(x, grid, workers=3)
    assert [(r.key, r.mae, r.std_abs_err) for r in one] == [(r.key, r.mae, r.std_abs_err) for r in three]


def test_grid_needs_complete_tensor(cohort):
    x = cohort[0].copy()
    x[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        run_experiment_grid(x, ExperimentGrid([ImputerConfig("SimpleMean")]))


@settings(max_examples=20)
@given(st.sampled_from(ALL_METHODS), st.sampled_from(list(Context)),
       st.sampled_from(["mcar", "transition", "block"]), st.integers(0, 2**20))
def test_end_to_end_pass_through(method, context, mechanism, seed):
    x, _ = generate_synthetic_cohort(3, 30, 3, seed=seed % 7)
    mask = generate_missing_mask(x, MissingnessSpec(mechanism, 0.2, seed=seed))
    out = apply_imputation(x, mask, quick(method, seed), context)
    assert np.isfinite(out).all()
    assert out[mask == 0].tobytes() == x[mask == 0].tobytes()


# --- report ----------------------------------------------------------------


def fake_records(n_angles=39):
    x, _ = generate_synthetic_cohort(2, 40, n_angles, seed=1)
    grid = ExperimentGrid([quick("SimpleMean"), quick("SimpleMedian")], ["mcar", "block"], [0.1, 0.2],
                          ["univariate", "multi-angle"])
    return run_experiment_grid(x, grid)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_report_files(tmp_path):
    records = fake_records()
    written = emit_report(records, tmp_path)
    rows = read_csv(written["results"])
    assert rows[0] == RESULTS_HEADER
    assert len(rows) == len(records) + 1
    assert all(row[7] == "" for row in rows[1:])  # runtime left out for reproducibility

    heat = read_csv(written["heatmap:block:multi-angle"])
    assert len(heat[0]) - 2 == 39
    assert len(heat) == 1 + 2 * 2

    bars = read_csv(written["errorbar:mcar:univariate"])
    want = [r for r in records if r.mechanism == "mcar" and r.context == "univariate"]
    assert [[r.method, repr(r.fraction), repr(r.mae), repr(r.std_abs_err)] for r in want] == bars[1:]


def test_report_432_records(tmp_path):
    template = fake_records(3)[0]
    records = []
    for method in ALL_METHODS[:8]:
        for mech in ("mcar", "transition", "block"):
            for frac in (0.05, 0.10, 0.15, 0.20, 0.25, 0.30):
                for ctx in ("univariate", "multi-player", "multi-angle"):
                    records.append(harness.ResultRecord(**{**template.__dict__, "method": method, "mechanism": mech,
                                                           "fraction": frac, "context": ctx}))
    written = emit_report(records, tmp_path)
    with open(written["results"], encoding="utf-8") as fh:
        assert len(fh.readlines()) == 433
    assert len([k for k in written if k.startswith("heatmap:")]) == 9


def test_report_runtime_optional(tmp_path):
    records = fake_records(2)
    rows = read_csv(emit_report(records, tmp_path, include_runtime=True)["results"])
    assert [int(r[7]) for r in rows[1:]] == [r.runtime_ms for r in records]


def test_report_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)


def test_report_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(fake_records(2), blocker / "out")
