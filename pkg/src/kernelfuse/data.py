"""Dataset generation, CSV ingestion, splitting, scaling, aggregation.

All randomness flows through numpy's default PCG64 generator seeded
explicitly, so every dataset is a pure function of its arguments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .kernels import _frozen_array

RNG_ID = "numpy.random.PCG64"
DEFAULT_TARGET = "target"


class MissingTargetError(ValueError):
    pass


class EmptyDataError(ValueError):
    pass


class DegenerateFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature affine map x -> (x - mins) / (maxs - mins)."""

    mins: np.ndarray
    maxs: np.ndarray


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    f: np.ndarray
    feature_names: tuple
    scaling: FeatureScaling | None
    seed: int | None
    dropped_rows: int = 0


@dataclass(frozen=True, eq=False)
class SplitDataset:
    train: Dataset
    test: Dataset
    seed: int


def _dataset(X, f, names, seed, scaling=None, dropped=0) -> Dataset:
    return Dataset(X=_frozen_array(np.asarray(X, dtype=float)),
                   f=_frozen_array(np.asarray(f, dtype=float)),
                   feature_names=tuple(names), scaling=scaling,
                   seed=seed, dropped_rows=dropped)


def f1_values(X) -> np.ndarray:
    """Gaussian bump over the first six coordinates; the rest are inert."""
    X = np.asarray(X, dtype=float)
    return np.exp(-np.sum((X[:, :6] - 0.5) ** 2, axis=1))


def f2_values(X, alpha) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (np.exp(X[:, 0] ** 2) + np.exp(X[:, 1]) + 3.0 * X[:, 2]
            + np.cos(X[:, 3] * X[:, 4]) + 4.0 * X[:, 5] ** 2
            + 10.0 ** alpha * (np.log(X[:, 6] + 2.0) + np.log(X[:, 7] + 2.0))
            + 1e-8 * np.sum(X[:, 8:15], axis=1))


def _feature_names(d):
    return tuple(f"x{j}" for j in range(d))


def gen_f1(n, d: int = 35, seed: int = 0) -> Dataset:
    if d < 6:
        raise ValueError("need at least 6 coordinates")
    X = np.random.default_rng(seed).uniform(size=(n, d))
    return _dataset(X, f1_values(X), _feature_names(d), seed)


def gen_f2(n, alpha, d: int = 15, seed: int = 0) -> Dataset:
    if d != 15:
        raise ValueError("this target is defined on 15 coordinates")
    if not (isinstance(alpha, (int, np.integer)) and -2 <= alpha <= 2):
        raise ValueError("alpha must be an integer in {-2, -1, 0, 1, 2}")
    X = np.random.default_rng(seed).uniform(size=(n, d))
    return _dataset(X, f2_values(X, int(alpha)), _feature_names(d), seed)


def split_80_20(ds: Dataset, seed: int) -> SplitDataset:
    n = ds.X.shape[0]
    if n < 5:
        raise ValueError("need at least 5 rows to split")
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(0.8 * n)
    tr, te = perm[:cut], perm[cut:]
    train = _dataset(ds.X[tr], ds.f[tr], ds.feature_names, ds.seed, ds.scaling)
    test = _dataset(ds.X[te], ds.f[te], ds.feature_names, ds.seed, ds.scaling)
    return SplitDataset(train=train, test=test, seed=seed)


def scale_minmax(ds: Dataset) -> Dataset:
    mins = ds.X.min(axis=0)
    maxs = ds.X.max(axis=0)
    flat = np.nonzero(maxs - mins == 0.0)[0]
    if flat.size:
        raise DegenerateFeatureError(
            f"feature {ds.feature_names[flat[0]]!r} is constant and cannot be scaled")
    scaling = FeatureScaling(mins=_frozen_array(mins), maxs=_frozen_array(maxs))
    return replace(ds, X=_frozen_array(apply_scaling(scaling, ds.X)), scaling=scaling)


def apply_scaling(scaling: FeatureScaling, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (X - scaling.mins) / (scaling.maxs - scaling.mins)


def invert_scaling(scaling: FeatureScaling, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    return Z * (scaling.maxs - scaling.mins) + scaling.mins


def load_csv(path, target_column: str) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path} has no header row") from None
        if target_column not in header:
            raise MissingTargetError(
                f"target column {target_column!r} not found in {header}")
        t_idx = header.index(target_column)
        keep = [j for j in range(len(header)) if j != t_idx]
        rows, targets, dropped = [], [], 0
        for raw in reader:
            if len(raw) != len(header):
                dropped += 1
                continue
            try:
                vals = [float(cell) for cell in raw]
            except ValueError:
                dropped += 1
                continue
            rows.append([vals[j] for j in keep])
            targets.append(vals[t_idx])
    if not rows:
        raise EmptyDataError(f"{path} has no usable data rows ({dropped} dropped)")
    names = tuple(header[j] for j in keep)
    return _dataset(rows, targets, names, seed=None, dropped=dropped)


def drop_features(ds: Dataset, names) -> Dataset:
    """Remove feature columns by name, e.g. a time axis after aggregation."""
    wanted = [names] if isinstance(names, str) else list(names)
    missing = [nm for nm in wanted if nm not in ds.feature_names]
    if missing:
        raise ValueError(f"unknown feature column(s): {', '.join(missing)}")
    keep = [j for j, nm in enumerate(ds.feature_names) if nm not in wanted]
    if not keep:
        raise EmptyDataError("dropping every feature leaves no columns")
    scaling = ds.scaling
    if scaling is not None:
        scaling = FeatureScaling(mins=scaling.mins[keep], maxs=scaling.maxs[keep])
    return _dataset(ds.X[:, keep], ds.f, [ds.feature_names[j] for j in keep],
                    seed=ds.seed, scaling=scaling, dropped=ds.dropped_rows)


def write_csv(ds: Dataset, path, target_name: str = DEFAULT_TARGET) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.feature_names) + [target_name])
        for row, target in zip(ds.X, ds.f):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{target:.17g}"])


def aggregate_by_window(ds: Dataset, time_feature: str, window_seconds: float) -> Dataset:
    if window_seconds <= 0:
        raise ValueError("window must be positive")
    if time_feature not in ds.feature_names:
        raise ValueError(f"unknown time column {time_feature!r}")
    t_idx = ds.feature_names.index(time_feature)
    t = ds.X[:, t_idx]
    if np.any(np.diff(t) <= 0):
        raise ValueError("time column must be strictly increasing")
    buckets = np.floor(t / window_seconds).astype(np.int64)
    # strictly increasing time means equal buckets are contiguous
    _, starts = np.unique(buckets, return_index=True)
    bounds = list(starts) + [len(t)]
    X_out = np.empty((len(starts), ds.X.shape[1]))
    f_out = np.empty(len(starts))
    for k in range(len(starts)):
        lo, hi = bounds[k], bounds[k + 1]
        X_out[k] = ds.X[lo:hi].mean(axis=0)
        f_out[k] = ds.f[lo:hi].mean()
    return _dataset(X_out, f_out, ds.feature_names, ds.seed, ds.scaling)
