"""Kernel interpolation and ridge regression for a fixed shape matrix.

A fitted model stores the training centers and the coefficient vector c
solving (K + lambda I) c = f.  With lambda = 0 this interpolates the
targets; with lambda > 0 it equals plain interpolation of the smoothed
targets (K + lambda I)^-1 K f, so one code path covers both uses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import ShapeMatrix, _canon_family, _frozen_array, kernel_cross, kernel_matrix
from .numerics import solve_spd

FORMAT_VERSION = 1


class ModelFormatError(RuntimeError):
    """Raised when a model file cannot be parsed or has the wrong version."""


@dataclass(frozen=True, eq=False)
class FittedModel:
    family: str
    sigma: ShapeMatrix
    centers: np.ndarray
    coeffs: np.ndarray
    ridge_lambda: float
    jitter_used: float


@dataclass(frozen=True)
class Metrics:
    rmse: float
    rmsre: float | None


def fit(family, sigma: ShapeMatrix, X, f, ridge_lambda: float = 0.0) -> FittedModel:
    family = _canon_family(family)
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("training inputs must be a nonempty n-by-d matrix")
    if f.shape != (X.shape[0],):
        raise ValueError("targets must be a vector matching the row count")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    K = kernel_matrix(family, sigma, X)
    if ridge_lambda > 0:
        K = K + ridge_lambda * np.eye(len(f))
    coeffs, eta = solve_spd(K, f)
    return FittedModel(
        family=family,
        sigma=sigma,
        centers=_frozen_array(X),
        coeffs=_frozen_array(coeffs),
        ridge_lambda=float(ridge_lambda),
        jitter_used=float(eta),
    )


def predict(model: FittedModel, Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != model.centers.shape[1]:
        raise ValueError("query points must be m-by-d with d matching the centers")
    return kernel_cross(model.family, model.sigma, Q, model.centers) @ model.coeffs


def power_function(family, sigma: ShapeMatrix, X, q):
    """Worst-case pointwise error factor sqrt(max(0, 1 - k(q)^T K^-1 k(q))).

    q may be a single d-vector or an m-by-d matrix of query points.
    """
    family = _canon_family(family)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("need at least one center")
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    Q = q[None, :] if single else q
    K = kernel_matrix(family, sigma, X)
    kv = kernel_cross(family, sigma, Q, X)
    sol, _ = solve_spd(K, kv.T)
    # phi(0) = 1 for every family, so kappa(q, q) = 1
    rad = 1.0 - np.einsum("mi,im->m", kv, sol)
    out = np.sqrt(np.maximum(rad, 0.0))
    return float(out[0]) if single else out


def native_norm(family, sigma: ShapeMatrix, X, f) -> float:
    family = _canon_family(family)
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    K = kernel_matrix(family, sigma, X)
    c, _ = solve_spd(K, f)
    return float(np.sqrt(max(0.0, float(f @ c))))


def fill_distance(X, domain_samples=None, n_probes: int = 4096, seed: int = 0) -> float:
    """Largest distance from a domain probe to its nearest point of X.

    Monte-Carlo estimate: probes default to uniform samples of the
    bounding box of X, so the value is a lower bound on the true fill
    distance of that box.
    """
    X = np.asarray(X, dtype=float)
    if domain_samples is None:
        rng = np.random.default_rng(seed)
        lo, hi = X.min(axis=0), X.max(axis=0)
        domain_samples = lo + rng.uniform(size=(n_probes, X.shape[1])) * (hi - lo)
    probes = np.asarray(domain_samples, dtype=float)
    return float(cdist(probes, X).min(axis=1).max())


def metrics(truth, pred) -> Metrics:
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if truth.shape != pred.shape or truth.ndim != 1 or truth.size == 0:
        raise ValueError("truth and prediction must be equal-length nonempty vectors")
    rmse = float(np.sqrt(np.mean((truth - pred) ** 2)))
    if np.abs(truth).min() < 1e-12:
        return Metrics(rmse=rmse, rmsre=None)
    rmsre = float(np.sqrt(np.mean(((truth - pred) / truth) ** 2)))
    return Metrics(rmse=rmse, rmsre=rmsre)


def save_model(model: FittedModel, path) -> None:
    n, d = model.centers.shape
    blob = {
        "format_version": FORMAT_VERSION,
        "family": model.family,
        "sigma_mode": model.sigma.mode,
        "sigma_entries": model.sigma.free_parameters().tolist(),
        "centers": {"n": n, "d": d, "data": model.centers.ravel().tolist()},
        "coeffs": model.coeffs.tolist(),
        "ridge_lambda": model.ridge_lambda,
        "jitter_used": model.jitter_used,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def _rebuild_sigma(mode: str, entries, d: int) -> ShapeMatrix:
    entries = np.asarray(entries, dtype=float)
    if mode == "isotropic":
        return ShapeMatrix.isotropic(float(entries[0]), d)
    if mode == "diagonal":
        return ShapeMatrix.diagonal(entries)
    if mode == "full":
        return ShapeMatrix.full(entries.reshape(d, d))
    raise ModelFormatError(f"unknown sigma_mode {mode!r}")


def load_model(path) -> FittedModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            blob = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file: {exc}") from exc
    version = blob.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    for key in ("family", "sigma_mode", "sigma_entries", "centers", "coeffs",
                "ridge_lambda", "jitter_used"):
        if key not in blob:
            raise ModelFormatError(f"model file is missing field {key!r}")
    centers = blob["centers"]
    X = np.asarray(centers["data"], dtype=float).reshape(centers["n"], centers["d"])
    sigma = _rebuild_sigma(blob["sigma_mode"], blob["sigma_entries"], centers["d"])
    return FittedModel(
        family=_canon_family(blob["family"]),
        sigma=sigma,
        centers=_frozen_array(X),
        coeffs=_frozen_array(np.asarray(blob["coeffs"], dtype=float)),
        ridge_lambda=float(blob["ridge_lambda"]),
        jitter_used=float(blob["jitter_used"]),
    )
