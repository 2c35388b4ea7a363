import math

import numpy as np
import pytest

from kernelfuse import data
from kernelfuse.data import (
    Dataset,
    DegenerateFeatureError,
    EmptyDataError,
    MissingTargetError,
    aggregate_by_window,
    apply_scaling,
    f1_values,
    f2_values,
    gen_f1,
    gen_f2,
    invert_scaling,
    load_csv,
    scale_minmax,
    split_80_20,
    write_csv,
)


# ---------------------------------------------------------------- generators


def test_f1_center_point_value():
    assert f1_values(np.full((1, 35), 0.5))[0] == 1.0


def test_f1_origin_value():
    want = math.exp(-1.5)
    assert math.isclose(f1_values(np.zeros((1, 35)))[0], want, rel_tol=1e-12)


def test_f1_ignores_trailing_coordinates():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(50, 35))
    Y = X.copy()
    Y[:, 6:] = rng.uniform(size=(50, 29))
    assert np.array_equal(f1_values(X), f1_values(Y))


def test_gen_f1_shapes_and_range():
    ds = gen_f1(100, seed=1)
    assert ds.X.shape == (100, 35)
    assert ds.f.shape == (100,)
    assert len(ds.feature_names) == 35
    assert ds.X.min() >= 0.0 and ds.X.max() <= 1.0
    np.testing.assert_array_equal(ds.f, f1_values(ds.X))


def test_gen_f1_deterministic():
    a = gen_f1(40, seed=9)
    b = gen_f1(40, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.f, b.f)


def test_gen_f1_rejects_small_dimension():
    with pytest.raises(ValueError):
        gen_f1(10, d=5, seed=0)


def test_f2_hand_values():
    z = np.zeros((1, 15))
    assert math.isclose(f2_values(z, 0)[0], 3.0 + 2.0 * math.log(2.0), rel_tol=1e-12)
    assert math.isclose(f2_values(z, 2)[0], 3.0 + 200.0 * math.log(2.0), rel_tol=1e-12)


@pytest.mark.parametrize("alpha", [-2, -1, 0, 1, 2])
def test_gen_f2_targets_positive(alpha):
    ds = gen_f2(500, alpha, seed=3)
    assert ds.f.min() > 0.0
    assert ds.X.shape == (500, 15)


def test_gen_f2_rejects_bad_alpha():
    with pytest.raises(ValueError):
        gen_f2(10, 3, seed=0)
    with pytest.raises(ValueError):
        gen_f2(10, 0.5, seed=0)


def test_gen_f2_rejects_bad_dimension():
    with pytest.raises(ValueError):
        gen_f2(10, 0, d=14, seed=0)


# ---------------------------------------------------------------- split


def test_split_sizes():
    ds = gen_f1(10, seed=0)
    parts = split_80_20(ds, seed=1)
    assert parts.train.X.shape[0] == 8
    assert parts.test.X.shape[0] == 2


def test_split_deterministic():
    ds = gen_f1(50, seed=0)
    a = split_80_20(ds, seed=4)
    b = split_80_20(ds, seed=4)
    assert np.array_equal(a.train.X, b.train.X)
    assert np.array_equal(a.test.f, b.test.f)


def test_split_partitions_rows():
    ds = gen_f2(137, 0, seed=2)
    parts = split_80_20(ds, seed=5)
    assert parts.train.X.shape[0] == int(0.8 * 137)
    assert parts.train.X.shape[0] + parts.test.X.shape[0] == 137
    merged = np.vstack([parts.train.X, parts.test.X])
    orig = {tuple(row) for row in ds.X}
    assert {tuple(row) for row in merged} == orig


def test_split_rejects_tiny_dataset():
    ds = gen_f1(4, seed=0)
    with pytest.raises(ValueError):
        split_80_20(ds, seed=0)


# ---------------------------------------------------------------- scaling


def _toy_dataset(X, names=None):
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"c{j}" for j in range(X.shape[1]))
    return Dataset(X=X, f=np.arange(float(X.shape[0])), feature_names=tuple(names),
                   scaling=None, seed=0)


def test_scale_minmax_maps_to_unit_interval():
    ds = _toy_dataset([[2.0, 0.0], [4.0, 1.0]])
    scaled = scale_minmax(ds)
    np.testing.assert_allclose(scaled.X, [[0.0, 0.0], [1.0, 1.0]], atol=1e-15)
    assert scaled.scaling is not None


def test_scale_minmax_identity_on_unit_features():
    ds = _toy_dataset([[0.0, 0.5], [1.0, 0.25], [0.5, 1.0], [0.25, 0.0]])
    scaled = scale_minmax(ds)
    np.testing.assert_allclose(scaled.X, ds.X, atol=1e-15)


def test_scale_round_trip():
    rng = np.random.default_rng(8)
    ds = _toy_dataset(rng.normal(5.0, 3.0, size=(30, 4)))
    scaled = scale_minmax(ds)
    back = invert_scaling(scaled.scaling, scaled.X)
    np.testing.assert_allclose(back, ds.X, atol=1e-12)
    again = apply_scaling(scaled.scaling, ds.X)
    np.testing.assert_allclose(again, scaled.X, atol=1e-12)


def test_scale_rejects_constant_feature():
    ds = _toy_dataset([[1.0, 7.0], [2.0, 7.0]], names=("good", "flat"))
    with pytest.raises(DegenerateFeatureError, match="flat"):
        scale_minmax(ds)


# ---------------------------------------------------------------- csv io


def test_load_csv_basic(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b,y\n1,2,3\n4,5,6\n")
    ds = load_csv(path, target_column="y")
    assert ds.feature_names == ("a", "b")
    np.testing.assert_array_equal(ds.X, [[1.0, 2.0], [4.0, 5.0]])
    np.testing.assert_array_equal(ds.f, [3.0, 6.0])
    assert ds.dropped_rows == 0


def test_load_csv_drops_malformed_rows(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b,y\n1,2,3\nx,5,6\n7,,9\n10,11,12\n")
    ds = load_csv(path, target_column="y")
    assert ds.X.shape == (2, 2)
    assert ds.dropped_rows == 2


def test_load_csv_target_position_free(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("y,a,b\n1,2,3\n")
    ds = load_csv(path, target_column="y")
    assert ds.feature_names == ("a", "b")
    np.testing.assert_array_equal(ds.X, [[2.0, 3.0]])
    np.testing.assert_array_equal(ds.f, [1.0])


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "absent.csv", target_column="y")


def test_load_csv_missing_target(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(MissingTargetError, match="y"):
        load_csv(path, target_column="y")


def test_load_csv_no_usable_rows(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("a,y\nbad,1\n,2\n")
    with pytest.raises(EmptyDataError):
        load_csv(path, target_column="y")


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(11)
    ds = _toy_dataset(rng.standard_normal((20, 3)) * 1e3)
    path = tmp_path / "round.csv"
    write_csv(ds, path)
    back = load_csv(path, target_column="target")
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.f, ds.f)
    assert back.feature_names == ds.feature_names


# ---------------------------------------------------------------- aggregation


def _timed_dataset(times, cols):
    X = np.column_stack([np.asarray(times, dtype=float)] + [np.asarray(c, dtype=float) for c in cols])
    names = ("t",) + tuple(f"s{j}" for j in range(1, len(cols) + 1))
    f = np.arange(float(len(times))) + 1.0
    return Dataset(X=X, f=f, feature_names=names, scaling=None, seed=0)


def test_aggregate_single_bucket():
    ds = _timed_dataset([0.0, 10.0, 20.0], [[1.0, 2.0, 3.0]])
    out = aggregate_by_window(ds, "t", window_seconds=1000.0)
    assert out.X.shape == (1, 2)
    assert math.isclose(out.X[0, 0], 10.0)
    assert math.isclose(out.X[0, 1], 2.0)
    assert math.isclose(out.f[0], 2.0)


def test_aggregate_identity_when_window_matches_cadence():
    ds = _timed_dataset([0.0, 600.0, 1200.0], [[5.0, 6.0, 7.0]])
    out = aggregate_by_window(ds, "t", window_seconds=600.0)
    np.testing.assert_allclose(out.X, ds.X, atol=1e-15)
    np.testing.assert_allclose(out.f, ds.f, atol=1e-15)


def test_aggregate_pairwise_means():
    ds = _timed_dataset([0.0, 600.0, 3600.0, 4200.0], [[1.0, 3.0, 10.0, 20.0]])
    out = aggregate_by_window(ds, "t", window_seconds=3600.0)
    assert out.X.shape == (2, 2)
    np.testing.assert_allclose(out.X[:, 1], [2.0, 15.0])
    np.testing.assert_allclose(out.f, [1.5, 3.5])


def test_aggregate_skips_empty_buckets():
    ds = _timed_dataset([0.0, 600.0, 7200.0], [[1.0, 2.0, 9.0]])
    out = aggregate_by_window(ds, "t", window_seconds=3600.0)
    assert out.X.shape == (2, 2)
    np.testing.assert_allclose(out.X[:, 1], [1.5, 9.0])


def test_aggregate_rejects_unsorted_time():
    ds = _timed_dataset([0.0, 600.0, 500.0], [[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        aggregate_by_window(ds, "t", window_seconds=600.0)


def test_aggregate_rejects_unknown_column():
    ds = _timed_dataset([0.0, 600.0], [[1.0, 2.0]])
    with pytest.raises(ValueError):
        aggregate_by_window(ds, "clock", window_seconds=600.0)


def test_drop_features_removes_columns():
    ds = gen_f2(30, alpha=0, seed=1)
    out = data.drop_features(ds, ["x0", "x3"])
    assert out.feature_names == tuple(f"x{j}" for j in range(15) if j not in (0, 3))
    assert out.X.shape == (30, 13)
    np.testing.assert_array_equal(out.X[:, 0], ds.X[:, 1])
    np.testing.assert_array_equal(out.f, ds.f)


def test_drop_features_unknown_name():
    ds = gen_f2(10, alpha=0, seed=1)
    with pytest.raises(ValueError, match="nope"):
        data.drop_features(ds, ["nope"])


def test_drop_features_keeps_scaling_slice():
    X = np.array([[0.0, 2.0, 5.0], [1.0, 4.0, 9.0], [0.5, 3.0, 7.0]])
    ds = data.scale_minmax(_toy_dataset(X, names=("a", "b", "c")))
    out = data.drop_features(ds, "b")
    assert out.feature_names == ("a", "c")
    np.testing.assert_allclose(out.scaling.mins, [0.0, 5.0])
    np.testing.assert_allclose(out.scaling.maxs, [1.0, 9.0])


def test_drop_all_features_rejected():
    ds = gen_f2(10, alpha=0, seed=1)
    with pytest.raises(data.EmptyDataError):
        data.drop_features(ds, list(ds.feature_names))


# ---------------------------------------------------------------- bundled csv


def test_bundled_planted_csv_matches_generator(tmp_path):
    # the committed fixture must be exactly what tools/make_planted_csv.py writes
    import importlib.util
    from pathlib import Path

    gen_path = Path(__file__).parents[1] / "tools" / "make_planted_csv.py"
    loader_spec = importlib.util.spec_from_file_location("make_planted_csv", gen_path)
    mod = importlib.util.module_from_spec(loader_spec)
    loader_spec.loader.exec_module(mod)

    out = tmp_path / "regen.csv"
    write_csv(mod.build(), out)
    bundled = Path(__file__).parent / "data" / "planted_timeseries.csv"
    assert out.read_bytes() == bundled.read_bytes()
