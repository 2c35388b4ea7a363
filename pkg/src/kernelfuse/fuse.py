"""Feature reduction from a learned shape matrix.

The learned metric theta = sigma^T sigma is eigen-decomposed, a retention
rule picks how many leading directions to keep, and the resulting p-by-d
map M (row k = sqrt(lambda_k) v_k^T) sends data into the reduced space.
Fitting a unit-shape kernel on mapped points reproduces the shaped fit
when p = d, and approximates it after truncation.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .kernels import ShapeMatrix, _frozen_array
from .numerics import EigenSpectrum, eigh_sorted

PLAN_FORMAT_VERSION = 1

# reporting floor for eigenvalues; retention rules always use raw values
EIGENVALUE_FLOOR = float(np.finfo(np.float64).eps)


class PlanFormatError(RuntimeError):
    """Raised when a reduction-plan file cannot be parsed or has the wrong version."""


@dataclass(frozen=True)
class AbsoluteThreshold:
    tau: float


@dataclass(frozen=True)
class RelativeThreshold:
    tau_rel: float


@dataclass(frozen=True)
class FixedCount:
    p: int


DEFAULT_RULE = RelativeThreshold(1e-4)


@dataclass(frozen=True, eq=False)
class ReductionPlan:
    spectrum: EigenSpectrum
    p: int
    map: np.ndarray
    rule: object


@dataclass(frozen=True)
class FeatureRanking:
    indices: tuple
    scores: tuple


def decompose_theta(sigma: ShapeMatrix) -> EigenSpectrum:
    """Eigen-decompose sigma^T sigma, descending, with a fixed sign convention.

    The largest-magnitude entry of every eigenvector is made positive so
    that plans are reproducible across eigen-solver implementations.
    """
    spec = eigh_sorted(sigma.theta())
    V = spec.vectors.copy()
    for k in range(V.shape[1]):
        lead = np.argmax(np.abs(V[:, k]))
        if V[lead, k] < 0:
            V[:, k] = -V[:, k]
    return EigenSpectrum(values=spec.values, vectors=V)


def _retained_count(values: np.ndarray, rule) -> int:
    d = len(values)
    if isinstance(rule, FixedCount):
        if not 1 <= rule.p <= d:
            raise ValueError(f"retained count must be in [1, {d}], got {rule.p}")
        return rule.p
    if isinstance(rule, AbsoluteThreshold):
        count = int(np.sum(values >= rule.tau))
    elif isinstance(rule, RelativeThreshold):
        count = int(np.sum(values >= rule.tau_rel * values[0]))
    else:
        raise ValueError(f"unknown retention rule {rule!r}")
    return max(count, 1)


def make_plan(spectrum: EigenSpectrum, rule=DEFAULT_RULE) -> ReductionPlan:
    p = _retained_count(spectrum.values, rule)
    scale = np.sqrt(np.maximum(spectrum.values[:p], 0.0))
    M = scale[:, None] * spectrum.vectors[:, :p].T
    return ReductionPlan(spectrum=spectrum, p=p, map=_frozen_array(M), rule=rule)


def map_dataset(plan: ReductionPlan, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    d = plan.map.shape[1]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected an n-by-{d} matrix, got shape {X.shape}")
    return X @ plan.map.T


def reduced_theta(plan: ReductionPlan) -> np.ndarray:
    return plan.map.T @ plan.map


def rank_features_diagonal(sigma: ShapeMatrix) -> FeatureRanking:
    if sigma.mode != "diagonal":
        raise ValueError("feature ranking needs a diagonal shape matrix")
    scores = np.diag(sigma.theta())
    order = np.argsort(-scores, kind="stable")
    return FeatureRanking(
        indices=tuple(int(j) for j in order),
        scores=tuple(float(scores[j]) for j in order),
    )


def write_spectrum_csv(plan: ReductionPlan, path) -> None:
    values = plan.spectrum.values
    clamped = np.maximum(values, EIGENVALUE_FLOOR)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "eigenvalue_raw", "eigenvalue_clamped", "retained"])
        for k, (raw, cl) in enumerate(zip(values, clamped)):
            writer.writerow([k + 1, repr(float(raw)), repr(float(cl)),
                             1 if k < plan.p else 0])


def write_ranking_csv(ranking: FeatureRanking, path, feature_names=None) -> None:
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(len(ranking.indices))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "index", "score"])
        for idx, score in zip(ranking.indices, ranking.scores):
            writer.writerow([feature_names[idx], idx, repr(score)])


_RULE_TAGS = {
    AbsoluteThreshold: ("absolute_threshold", lambda r: r.tau),
    RelativeThreshold: ("relative_threshold", lambda r: r.tau_rel),
    FixedCount: ("fixed_count", lambda r: r.p),
}


def _rule_from_tag(tag: str, value):
    if tag == "absolute_threshold":
        return AbsoluteThreshold(float(value))
    if tag == "relative_threshold":
        return RelativeThreshold(float(value))
    if tag == "fixed_count":
        return FixedCount(int(value))
    raise PlanFormatError(f"unknown retention rule tag {tag!r}")


def save_plan(plan: ReductionPlan, path) -> None:
    tag, getter = _RULE_TAGS[type(plan.rule)]
    d = plan.map.shape[1]
    blob = {
        "format_version": PLAN_FORMAT_VERSION,
        "d": d,
        "p": plan.p,
        "rule": {"kind": tag, "value": getter(plan.rule)},
        "eigenvalues": plan.spectrum.values.tolist(),
        "eigenvectors": plan.spectrum.vectors.ravel().tolist(),
        "map": plan.map.ravel().tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def load_plan(path) -> ReductionPlan:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            blob = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanFormatError(f"cannot read plan file: {exc}") from exc
    version = blob.get("format_version")
    if version != PLAN_FORMAT_VERSION:
        raise PlanFormatError(
            f"unsupported plan format version {version!r} (expected {PLAN_FORMAT_VERSION})")
    for key in ("d", "p", "rule", "eigenvalues", "eigenvectors", "map"):
        if key not in blob:
            raise PlanFormatError(f"plan file is missing field {key!r}")
    d, p = int(blob["d"]), int(blob["p"])
    spectrum = EigenSpectrum(
        values=_frozen_array(np.asarray(blob["eigenvalues"], dtype=float)),
        vectors=_frozen_array(np.asarray(blob["eigenvectors"], dtype=float).reshape(d, d)),
    )
    rule = _rule_from_tag(blob["rule"]["kind"], blob["rule"]["value"])
    return ReductionPlan(
        spectrum=spectrum,
        p=p,
        map=_frozen_array(np.asarray(blob["map"], dtype=float).reshape(p, d)),
        rule=rule,
    )
