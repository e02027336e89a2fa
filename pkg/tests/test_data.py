import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mocap_impute.data import (
    DatasetError,
    DatasetManifest,
    DegenerateAngleError,
    DimensionError,
    NormalizationParams,
    denormalize,
    generate_synthetic_cohort,
    load_dataset,
    normalize,
    save_dataset,
)

HEADER = "player,time,angle,value\n"


def write_csv(path, rows):
    path.write_text(HEADER + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


# --- loading ---------------------------------------------------------------


def test_load_counts_dims(tmp_path):
    rows = [f"p{p},{t},knee_flex,{p + t}" for p in range(2) for t in range(3)]
    tensor, manifest = load_dataset(write_csv(tmp_path / "d.csv", rows))
    assert tensor.shape == (2, 3, 1)
    assert manifest.dims == (2, 3, 1)
    assert tensor[1, 2, 0] == 3.0


def test_empty_value_is_nan(tmp_path):
    rows = ["p1,0,knee_flex,", "p1,1,knee_flex,2.5", "p1,2,knee_flex,nan"]
    tensor, _ = load_dataset(write_csv(tmp_path / "d.csv", rows))
    assert math.isnan(tensor[0, 0, 0])
    assert math.isnan(tensor[0, 2, 0])
    assert tensor[0, 1, 0] == 2.5


def test_missing_index_is_dimension_error(tmp_path):
    rows = [f"p{p},{t},a0,1.0" for p in range(2) for t in range(3) if (p, t) != (1, 2)]
    # with the row for (p1, 2) gone, T is still 3 from p0 and coverage fails
    with pytest.raises(DimensionError, match="missing row"):
        load_dataset(write_csv(tmp_path / "d.csv", rows))


def test_malformed_row_reports_line(tmp_path):
    rows = ["p0,0,a0,1.0", "p0,one,a0,2.0", "p0,2,a0,3.0"]
    with pytest.raises(DatasetError, match="line 3"):
        load_dataset(write_csv(tmp_path / "d.csv", rows))
    rows = ["p0,0,a0,1.0", "p0,1,a0,abc"]
    with pytest.raises(DatasetError, match="line 3"):
        load_dataset(write_csv(tmp_path / "e.csv", rows))
    rows = ["p0,0,a0"]
    with pytest.raises(DatasetError, match="line 2"):
        load_dataset(write_csv(tmp_path / "f.csv", rows))


def test_duplicate_row_rejected(tmp_path):
    rows = ["p0,0,a0,1.0", "p0,0,a0,1.0", "p0,1,a0,2.0"]
    with pytest.raises(DimensionError, match="duplicate"):
        load_dataset(write_csv(tmp_path / "d.csv", rows))


def test_bad_header(tmp_path):
    (tmp_path / "d.csv").write_text("a,b,c,d\np0,0,a0,1\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="header"):
        load_dataset(tmp_path / "d.csv")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope")


# --- saving ----------------------------------------------------------------


def test_round_trip_bitwise(tmp_path, rng):
    x = rng.standard_normal((3, 4, 2)) * 100
    manifest = DatasetManifest.default(x.shape)
    save_dataset(x, manifest, tmp_path / "ds")
    y, m2 = load_dataset(tmp_path / "ds")
    assert np.array_equal(x, y)
    assert x.tobytes() == y.tobytes()
    assert m2 == manifest


def test_one_missing_one_empty_cell(tmp_path, rng):
    x = rng.standard_normal((2, 5, 3))
    x[1, 3, 2] = np.nan
    save_dataset(x, DatasetManifest.default(x.shape), tmp_path / "ds")
    lines = (tmp_path / "ds" / "data.csv").read_text().splitlines()[1:]
    assert sum(line.endswith(",") for line in lines) == 1
    y, _ = load_dataset(tmp_path / "ds")
    assert np.isnan(y[1, 3, 2]) and np.isnan(y).sum() == 1


def test_save_dims_mismatch(tmp_path):
    with pytest.raises(DimensionError):
        save_dataset(np.zeros((2, 3, 4)), DatasetManifest.default((2, 3, 5)), tmp_path / "ds")


def test_manifest_label_count_checked():
    with pytest.raises(DimensionError):
        DatasetManifest("x", 2, 3, 1, angles=["a", "b"], players=["p0", "p1"])


@given(arrays(np.float64, (2, 3, 2), elements=st.floats(allow_nan=True, allow_infinity=False, width=64)))
def test_round_trip_property(tmp_path_factory, x):
    d = tmp_path_factory.mktemp("rt")
    save_dataset(x, DatasetManifest.default(x.shape), d)
    y, _ = load_dataset(d)
    assert np.array_equal(np.isnan(x), np.isnan(y))
    ok = ~np.isnan(x)
    assert x[ok].tobytes() == y[ok].tobytes()


# --- normalization ---------------------------------------------------------


def series(values):
    return np.asarray(values, dtype=float).reshape(1, -1, 1)


def test_normalize_endpoints():
    out, params = normalize(series([0, 5, 10]))
    assert np.allclose(out.ravel(), [0, 0.5, 1.0], atol=1e-5)
    assert params.epsilon == 1e-6
    assert out.ravel()[1] == 5 / (10 + 1e-6)


def test_normalize_constant_series():
    out, _ = normalize(series([3, 3, 3]))
    assert np.array_equal(out.ravel(), [0, 0, 0])


def test_normalize_uses_observed_only():
    mask = np.array([0, 1], dtype=np.uint8).reshape(1, 2, 1)
    out, params = normalize(series([0, 100]), mask)
    assert params.min[0] == 0 and params.max[0] == 0
    assert out.ravel()[0] == 0


def test_normalize_degenerate_angle():
    x = np.ones((1, 3, 2))
    mask = np.zeros((1, 3, 2), dtype=np.uint8)
    mask[:, :, 1] = 1
    with pytest.raises(DegenerateAngleError, match="angle 1"):
        normalize(x, mask)


def test_denormalize_round_trip():
    x = series([0, 5, 10])
    out, params = normalize(x)
    assert np.allclose(denormalize(out, params), x, rtol=0, atol=1e-9)


def test_denormalize_zero_range():
    params = NormalizationParams([2.0], [2.0], 1e-6)
    assert denormalize(series([0.0, 0.0]), params).ravel()[0] == 2.0


def test_denormalize_angle_mismatch():
    params = NormalizationParams(np.zeros(39), np.ones(39))
    with pytest.raises(DimensionError):
        denormalize(np.zeros((1, 4, 38)), params)


@given(arrays(np.float64, (3, 6, 2), elements=st.floats(-1e3, 1e3)))
def test_normalize_properties(x):
    out, params = normalize(x)
    assert out.min() >= 0 and out.max() <= 1
    nonflat = params.max > params.min
    back = denormalize(out, params)
    rel = np.abs(back - x) / np.maximum(np.abs(x), 1.0)
    assert rel[..., nonflat].max(initial=0) < 1e-9
    # normalize . denormalize . normalize == normalize
    again, _ = normalize(denormalize(out, params))
    assert np.allclose(again, out, atol=1e-9)


@given(
    arrays(np.float64, (2, 8, 1), elements=st.floats(-50, 50)),
    arrays(np.uint8, (2, 8, 1), elements=st.integers(0, 1)),
)
def test_masking_keeps_extrema_of_remaining(x, mask):
    mask[0, 0, 0] = 0
    _, params = normalize(x, mask)
    kept = x[mask == 0]
    assert params.min[0] == kept.min() and params.max[0] == kept.max()


# --- synthetic cohort ------------------------------------------------------


def test_cohort_deterministic():
    a, ma = generate_synthetic_cohort(4, 32, 3, seed=7)
    b, mb = generate_synthetic_cohort(4, 32, 3, seed=7)
    assert a.tobytes() == b.tobytes() and ma == mb
    c, _ = generate_synthetic_cohort(4, 32, 3, seed=8)
    assert not np.array_equal(a, c)


def test_cohort_identical_players_without_noise():
    x, _ = generate_synthetic_cohort(5, 50, 3, seed=1, coupling=0.0, cohort_noise=0.0)
    for a in range(3):
        for p in range(1, 5):
            r = np.corrcoef(x[0, :, a], x[p, :, a])[0, 1]
            assert abs(r - 1.0) < 1e-9


def mean_abs_angle_corr(x):
    flat = x.transpose(1, 0, 2).reshape(-1, x.shape[2])
    c = np.corrcoef(flat.T)
    return np.abs(c[~np.eye(len(c), dtype=bool)]).mean()


def test_coupling_raises_angle_correlation():
    lo, _ = generate_synthetic_cohort(10, 100, 6, seed=3, coupling=0.0)
    hi, _ = generate_synthetic_cohort(10, 100, 6, seed=3, coupling=0.8)
    assert mean_abs_angle_corr(hi) > mean_abs_angle_corr(lo)


def test_cohort_range_and_dims():
    x, m = generate_synthetic_cohort(6, 40, 5, seed=2)
    assert x.shape == (6, 40, 5) == m.dims
    assert np.isfinite(x).all()
    # jitter can push a player slightly past its angle's span, not far outside the range
    assert x.min() > -120 and x.max() < 210


@pytest.mark.parametrize("dims", [(1, 100, 8), (10, 15, 8), (10, 100, 1)])
def test_cohort_invalid_dims(dims):
    with pytest.raises(DimensionError):
        generate_synthetic_cohort(*dims)
