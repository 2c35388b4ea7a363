"""Radial kernel families with a learnable shape matrix.

A kernel value is phi(r) with r^2 = (x - z)^T Sigma^T Sigma (x - z),
so evaluating at Sigma-mapped points with the unit shape gives the
same number. Three families are provided: a Gaussian ("ga") and two
Matern profiles of differing smoothness ("m2", "m0").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("ga", "m2", "m0")

# block size target for pairwise distance assembly, in array elements
_BLOCK_ELEMS = 8_000_000


def _canon_family(family: str) -> str:
    fam = str(family).strip().lower()
    if fam not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}; expected one of {FAMILIES}")
    return fam


def phi(family: str, r):
    """Radial profile phi(r) for r >= 0.

    ga: exp(-r^2); m2: (1 + r) exp(-r); m0: exp(-r).
    """
    fam = _canon_family(family)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("phi expects nonnegative radii")
    if fam == "ga":
        out = np.exp(-r * r)
    elif fam == "m2":
        out = (1.0 + r) * np.exp(-r)
    else:
        out = np.exp(-r)
    return float(out) if out.ndim == 0 else out


def phi_dq(family: str, q):
    """Derivative of phi(sqrt(q)) with respect to q.

    ga: -exp(-q); m2: -exp(-sqrt(q))/2; m0: -exp(-sqrt(q))/(2 sqrt(q)).
    q is clamped below at 1e-14 before the m0 division; small negative
    inputs from float roundoff are treated as zero.
    """
    fam = _canon_family(family)
    q = np.maximum(np.asarray(q, dtype=float), 0.0)
    if fam == "ga":
        out = -np.exp(-q)
    elif fam == "m2":
        out = -0.5 * np.exp(-np.sqrt(q))
    else:
        qc = np.maximum(q, 1e-14)
        rc = np.sqrt(qc)
        out = -np.exp(-rc) / (2.0 * rc)
    return float(out) if out.ndim == 0 else out


def _phi_from_q(fam: str, q):
    # shared evaluation path: kernel value from squared mapped distance
    if fam == "ga":
        return np.exp(-q)
    r = np.sqrt(q)
    if fam == "m2":
        return (1.0 + r) * np.exp(-r)
    return np.exp(-r)


def _pair_sq_dists(Ya: np.ndarray, Yb: np.ndarray) -> np.ndarray:
    """Squared distances between rows of Ya and rows of Yb.

    Computed from explicit differences (not the expanded dot-product
    form) so entries match single-pair evaluation bit for bit and the
    result is exactly symmetric when Ya is Yb.
    """
    m, d = Ya.shape
    n = Yb.shape[0]
    out = np.empty((m, n))
    block = max(1, _BLOCK_ELEMS // max(1, n * d))
    for start in range(0, m, block):
        stop = min(m, start + block)
        diff = Ya[start:stop, None, :] - Yb[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


@dataclass(frozen=True, eq=False)
class ShapeMatrix:
    """Shape matrix Sigma in one of three modes.

    entries holds a scalar (isotropic), the diagonal (diagonal), or the
    full d x d matrix (full). The kernel only sees Sigma^T Sigma, so the
    sign of entries is irrelevant; they just have to be finite.
    """

    mode: str
    dim: int
    entries: np.ndarray

    @staticmethod
    def isotropic(value: float, dim: int) -> "ShapeMatrix":
        value = float(value)
        if not np.isfinite(value):
            raise ValueError("isotropic shape value must be finite")
        if int(dim) < 1:
            raise ValueError("dimension must be at least 1")
        return ShapeMatrix("isotropic", int(dim), _frozen_array(value))

    @staticmethod
    def diagonal(values) -> "ShapeMatrix":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("diagonal shape expects a 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("diagonal shape entries must be finite")
        return ShapeMatrix("diagonal", arr.size, _frozen_array(arr))

    @staticmethod
    def full(matrix) -> "ShapeMatrix":
        arr = np.asarray(matrix, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise ValueError("full shape expects a square matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("full shape entries must be finite")
        return ShapeMatrix("full", arr.shape[0], _frozen_array(arr))

    def matrix(self) -> np.ndarray:
        if self.mode == "isotropic":
            return float(self.entries) * np.eye(self.dim)
        if self.mode == "diagonal":
            return np.diag(self.entries)
        return self.entries.copy()

    def theta(self) -> np.ndarray:
        """Metric Sigma^T Sigma."""
        if self.mode == "isotropic":
            return float(self.entries) ** 2 * np.eye(self.dim)
        if self.mode == "diagonal":
            return np.diag(self.entries**2)
        return self.entries.T @ self.entries

    def map_points(self, X: np.ndarray) -> np.ndarray:
        """Rows of X sent through Sigma: returns X Sigma^T."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"points have dimension {X.shape}, shape matrix is {self.dim}-d")
        if self.mode == "isotropic":
            return float(self.entries) * X
        if self.mode == "diagonal":
            return X * self.entries
        # einsum (non-BLAS path) keeps row results independent of the
        # batch shape, so single-pair and matrix evaluation agree bitwise
        return np.einsum("nk,jk->nj", X, self.entries)

    @property
    def n_free(self) -> int:
        if self.mode == "isotropic":
            return 1
        if self.mode == "diagonal":
            return self.dim
        return self.dim * self.dim

    def free_parameters(self) -> np.ndarray:
        """Free entries as a flat vector (row-major for full mode)."""
        if self.mode == "isotropic":
            return np.array([float(self.entries)])
        return self.entries.ravel().copy()

    def with_parameters(self, params) -> "ShapeMatrix":
        """Same mode and dimension, new free entries."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} parameters, got shape {params.shape}")
        if self.mode == "isotropic":
            return ShapeMatrix.isotropic(params[0], self.dim)
        if self.mode == "diagonal":
            return ShapeMatrix.diagonal(params)
        return ShapeMatrix.full(params.reshape(self.dim, self.dim))


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


def eval_kernel(family: str, sigma: ShapeMatrix, x, z) -> float:
    """Kernel value phi(sqrt((x-z)^T Sigma^T Sigma (x-z))) for one pair."""
    fam = _canon_family(family)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (sigma.dim,) or z.shape != (sigma.dim,):
        raise ValueError("point dimension does not match the shape matrix")
    q = _pair_sq_dists(sigma.map_points(x[None, :]), sigma.map_points(z[None, :]))[0, 0]
    return float(_phi_from_q(fam, q))


def kernel_matrix(family: str, sigma: ShapeMatrix, X) -> np.ndarray:
    """Symmetric kernel matrix K[i, j] = eval_kernel(x_i, x_j).

    Exactly symmetric with a unit diagonal by construction.
    """
    fam = _canon_family(family)
    Y = sigma.map_points(np.asarray(X, dtype=float))
    return _phi_from_q(fam, _pair_sq_dists(Y, Y))


def kernel_cross(family: str, sigma: ShapeMatrix, Q, X) -> np.ndarray:
    """Cross kernel matrix between probe rows Q and data rows X."""
    fam = _canon_family(family)
    Yq = sigma.map_points(np.asarray(Q, dtype=float))
    Yx = sigma.map_points(np.asarray(X, dtype=float))
    return _phi_from_q(fam, _pair_sq_dists(Yq, Yx))


def _pair_sq_dists_fast(Y: np.ndarray) -> np.ndarray:
    """Pairwise squared distances via the product expansion.

    Much faster than the explicit-difference route for large n but
    carries ~1e-14 float noise, so it is symmetrized, clamped at zero,
    and given an exact zero diagonal. Used by the optimizer hot path;
    kernel_matrix keeps the entrywise-exact route.
    """
    sq = np.einsum("ij,ij->i", Y, Y)
    with np.errstate(invalid="ignore", over="ignore"):  # overflow handled by caller
        G = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    Q = G + G.T  # fresh array; in-place G += G.T would alias
    Q *= 0.5
    np.maximum(Q, 0.0, out=Q)
    np.fill_diagonal(Q, 0.0)
    return Q


def mapped_sq_dists(sigma: ShapeMatrix, X, fast: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Mapped points Y = X Sigma^T and their pairwise squared distances."""
    Y = sigma.map_points(np.asarray(X, dtype=float))
    if fast:
        return Y, _pair_sq_dists_fast(Y)
    return Y, _pair_sq_dists(Y, Y)


def kernel_matrix_grad_sigma(family: str, sigma: ShapeMatrix, X) -> np.ndarray:
    """Derivative of the kernel matrix with respect to each free shape entry.

    Returns an array of shape (n_free, n, n) ordered like
    sigma.free_parameters(). Entry (a, b) of a full Sigma contributes

        dK_ij / dSigma_ab = phi_dq(q_ij) * 2 * (Sigma delta_ij)_a * (delta_ij)_b

    with delta_ij = x_i - x_j; diagonal mode keeps only a == b and
    isotropic mode sums the diagonal. Materializes every matrix, so it
    is meant for small n; the optimizer uses an adjoint form instead.
    """
    fam = _canon_family(family)
    X = np.asarray(X, dtype=float)
    Y, Q = mapped_sq_dists(sigma, X)
    P = phi_dq(fam, Q)
    n, d = X.shape
    DX = X.T[:, :, None] - X.T[:, None, :]  # (d, n, n)
    DY = Y.T[:, :, None] - Y.T[:, None, :]
    if sigma.mode == "full":
        out = np.empty((d * d, n, n))
        for a in range(d):
            for b in range(d):
                out[a * d + b] = 2.0 * P * DY[a] * DX[b]
    elif sigma.mode == "diagonal":
        out = np.empty((d, n, n))
        for a in range(d):
            out[a] = 2.0 * P * DY[a] * DX[a]
    else:
        out = (2.0 * P * np.einsum("aij,aij->ij", DY, DX))[None, :, :]
    for g in out:
        np.fill_diagonal(g, 0.0)
    return out
