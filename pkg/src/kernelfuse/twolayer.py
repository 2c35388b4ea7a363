"""Shape-matrix learning by minimizing a closed-form leave-one-out loss.

The loss for a kernel system (K + lambda I) c = f is

    L = (1/n) sum_i (c_i / A_ii)^2,   A = (K + lambda I)^{-1},

whose i-th term equals the residual of refitting without point i and
predicting it back. The gradient is assembled in adjoint form: with
u = c / a^2, w = c^2 / a^3 (a = diag A),

    dL = <G, dK>,  G = (2/n) (A diag(w) A - (A u) c^T),

and folding dK_ij / dSigma = phi_dq(q_ij) * 2 (Sigma d_ij) d_ij^T gives

    dL/dSigma = 4 Y^T (diag(r) - W) X,

where W is the symmetrized G .* phi_dq(Q), r its row sums, Y = X Sigma^T.
This costs O(n^3 + n^2 d) per evaluation with nothing materialized per
shape entry. Pairwise distances use the fast product expansion
(see kernels._pair_sq_dists_fast); the ~1e-14 noise it carries is far
below every tolerance used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import ShapeMatrix
from .numerics import spd_inverse


class OptimizationDivergedError(RuntimeError):
    """Loss, gradient, or parameters became non-finite; carries the trace."""

    def __init__(self, trace: "OptimizationTrace"):
        self.trace = trace
        super().__init__("optimization diverged (non-finite loss, gradient, or parameters)")


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam settings for the shape-matrix fit."""

    mode: str = "diagonal"  # isotropic | diagonal | full
    max_iters: int = 200
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int | None = None  # None = full batch
    ridge_lambda: float = 1e-8
    seed: int = 0
    init_scale: float | None = None  # None = 1/sqrt(d)
    tol_rel_loss: float = 1e-6
    patience: int = 20


@dataclass
class IterationRecord:
    index: int
    loss: float
    grad_norm: float
    batch: np.ndarray | None
    accepted: bool


@dataclass
class OptimizationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    best_index: int = 0
    best_loss: float = float("inf")
    converged: bool = False
    final_sigma: "kernels.ShapeMatrix | None" = None
    iterations_run: int = 0


def _loss_core(fam, sigma, X, f, lam, want_grad):
    n = f.size
    Y, Q = kernels.mapped_sq_dists(sigma, X, fast=True)
    K = kernels._phi_from_q(fam, Q)
    if not np.all(np.isfinite(K)):
        bad = np.full(sigma.n_free, np.nan)
        return (np.nan, bad) if want_grad else (np.nan, None)
    M = K if lam == 0.0 else K + lam * np.eye(n)
    A, _ = spd_inverse(M, jitter_start=0.0)
    c = A @ f
    a = np.diag(A)
    e = c / a
    loss = float(np.mean(e * e))
    if not want_grad:
        return loss, None
    u = c / (a * a)
    w = c * c / (a * a * a)
    G = (2.0 / n) * ((A * w) @ A - np.outer(A @ u, c))
    P = kernels.phi_dq(fam, Q)
    W = G * P
    W = (W + W.T) * 0.5
    np.fill_diagonal(W, 0.0)
    r = W.sum(axis=1)
    Z = r[:, None] * X - W @ X
    if sigma.mode == "full":
        grad = 4.0 * (Y.T @ Z).ravel()
    else:
        per_coord = 4.0 * np.einsum("ij,ij->j", Y, Z)
        grad = np.array([per_coord.sum()]) if sigma.mode == "isotropic" else per_coord
    return loss, grad


def loocv_loss(family, sigma, X, f, ridge_lambda: float = 0.0) -> float:
    """Closed-form leave-one-out loss; equals explicit per-point refits."""
    fam = kernels._canon_family(family)
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    loss, _ = _loss_core(fam, sigma, X, f, ridge_lambda, want_grad=False)
    return loss


def loocv_grad(family, sigma, X, f, ridge_lambda: float = 0.0) -> np.ndarray:
    """Gradient of loocv_loss with respect to the free shape entries."""
    fam = kernels._canon_family(family)
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    _, grad = _loss_core(fam, sigma, X, f, ridge_lambda, want_grad=True)
    return grad


def loocv_loss_and_grad(family, sigma, X, f, ridge_lambda: float = 0.0):
    """Loss and gradient from one factorization."""
    fam = kernels._canon_family(family)
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    return _loss_core(fam, sigma, X, f, ridge_lambda, want_grad=True)


def _initial_sigma(mode: str, d: int, scale: float) -> ShapeMatrix:
    if mode == "isotropic":
        return ShapeMatrix.isotropic(scale, d)
    if mode == "diagonal":
        return ShapeMatrix.diagonal(np.full(d, scale))
    if mode == "full":
        return ShapeMatrix.full(scale * np.eye(d))
    raise ValueError(f"unknown shape mode {mode!r}")


def optimize_sigma(family, X, f, config: OptimizerConfig):
    """Adam on the leave-one-out loss from Sigma_0 = init_scale * I.

    Returns (best sigma, trace). The trace records the full-data loss
    each iteration; with a batch_size set, gradients come from a seeded
    row subsample but acceptance still uses the full-data loss. Stops
    early when the best loss has not improved by tol_rel_loss
    (relatively) for `patience` iterations.
    """
    fam = kernels._canon_family(family)
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    if X.ndim != 2 or f.shape != (X.shape[0],):
        raise ValueError("X must be (n, d) with matching target vector")
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two points")
    if config.batch_size is not None and config.batch_size < 2:
        raise ValueError("batch_size must be at least 2")

    scale = config.init_scale if config.init_scale is not None else 1.0 / np.sqrt(d)
    template = _initial_sigma(config.mode, d, float(scale))
    params = template.free_parameters()
    rng = np.random.default_rng(config.seed)

    m = np.zeros_like(params)
    v = np.zeros_like(params)
    trace = OptimizationTrace()
    best_params = params.copy()
    stall = 0

    for t in range(1, config.max_iters + 1):
        sigma_t = template.with_parameters(params)
        use_batch = config.batch_size is not None and config.batch_size < n
        if use_batch:
            idx = np.sort(rng.choice(n, size=config.batch_size, replace=False))
            loss_b, grad = _loss_core(fam, sigma_t, X[idx], f[idx], config.ridge_lambda, True)
            full_loss, _ = _loss_core(fam, sigma_t, X, f, config.ridge_lambda, False)
        else:
            idx = None
            full_loss, grad = _loss_core(fam, sigma_t, X, f, config.ridge_lambda, True)

        grad_norm = float(np.linalg.norm(grad))
        accepted = full_loss < trace.best_loss
        trace.records.append(IterationRecord(t, full_loss, grad_norm, idx, accepted))
        if not np.isfinite(full_loss) or not np.all(np.isfinite(grad)):
            _finalize(trace, template, best_params)
            raise OptimizationDivergedError(trace)

        if accepted:
            improved_enough = not np.isfinite(trace.best_loss) or (
                full_loss < trace.best_loss - config.tol_rel_loss * abs(trace.best_loss)
            )
            trace.best_loss = full_loss
            trace.best_index = t
            best_params = params.copy()
            stall = 0 if improved_enough else stall + 1
        else:
            stall += 1
        if stall >= config.patience:
            trace.converged = True
            break

        m = config.beta1 * m + (1.0 - config.beta1) * grad
        v = config.beta2 * v + (1.0 - config.beta2) * grad * grad
        mhat = m / (1.0 - config.beta1**t)
        vhat = v / (1.0 - config.beta2**t)
        params = params - config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
        if not np.all(np.isfinite(params)):
            _finalize(trace, template, best_params)
            raise OptimizationDivergedError(trace)

    _finalize(trace, template, best_params)
    return trace.final_sigma, trace


def _finalize(trace: OptimizationTrace, template, best_params) -> None:
    # best params are finite by construction, even on a diverged run
    trace.final_sigma = template.with_parameters(best_params)
    trace.iterations_run = len(trace.records)


def write_trace(trace: OptimizationTrace, path) -> None:
    """Tabular trace export: one row per iteration."""
    lines = ["iter,loss,grad_norm"]
    for rec in trace.records:
        lines.append(f"{rec.index},{rec.loss!r},{rec.grad_norm!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
