"""Dense symmetric linear algebra used by the regression layers.

Every factorization retries with an escalating diagonal jitter before
giving up, and reports the jitter it ended up using so callers can
record it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dpotrf, dpotri

JITTER_BASE = 1e-12
JITTER_CAP = 1e-2

_SYM_TOL = 1e-10


class SingularSystemError(RuntimeError):
    """Factorization failed even at the jitter cap."""

    def __init__(self, jitter: float):
        self.jitter = float(jitter)
        super().__init__(
            f"matrix is not positive definite even with jitter {jitter:.0e} on the diagonal"
        )


@dataclass(frozen=True)
class EigenSpectrum:
    """Eigenvalues sorted descending with matching eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray


def _check_symmetric(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.T).max() > _SYM_TOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return A


def _jitter_ladder(jitter_start: float):
    if jitter_start < 0:
        raise ValueError("jitter_start must be nonnegative")
    yield jitter_start
    eta = JITTER_BASE if jitter_start == 0.0 else jitter_start * 10.0
    while eta <= JITTER_CAP * (1.0 + 1e-9):
        yield eta
        eta *= 10.0


def _factor_with_jitter(A: np.ndarray, jitter_start: float):
    """Cholesky factor of A + eta I for the smallest workable eta."""
    n = A.shape[0]
    eta = jitter_start
    for eta in _jitter_ladder(jitter_start):
        M = A if eta == 0.0 else A + eta * np.eye(n)
        try:
            factor = cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        return factor, eta
    raise SingularSystemError(eta)


def solve_spd(A, b, jitter_start: float = 0.0):
    """Solve (A + eta I) x = b for SPD-ish A.

    Returns (x, eta) where eta is the jitter that made the Cholesky
    factorization succeed (0 when none was needed).
    """
    A = _check_symmetric(A)
    b = np.asarray(b, dtype=float)
    factor, eta = _factor_with_jitter(A, jitter_start)
    x = cho_solve(factor, b, check_finite=False)
    return x, eta


def spd_inverse(A, jitter_start: float = 0.0):
    """Full inverse of (A + eta I). Returns (inverse, eta).

    The inverse is assembled from the LAPACK triangular inversion and
    symmetrized exactly by mirroring the computed triangle.
    """
    A = _check_symmetric(A)
    n = A.shape[0]
    eta = jitter_start
    for eta in _jitter_ladder(jitter_start):
        M = A + eta * np.eye(n) if eta != 0.0 else A.copy()
        c, info = dpotrf(M, lower=1, overwrite_a=True)
        if info != 0:
            continue
        inv, info = dpotri(c, lower=1, overwrite_c=True)
        if info != 0:
            continue
        # dpotri fills only the lower triangle; mirror it
        full = np.tril(inv)
        full += np.tril(inv, -1).T
        return full, eta
    raise SingularSystemError(eta)


def inverse_diag(A, jitter_start: float = 0.0):
    """Diagonal of (A + eta I)^{-1}. Returns (diag, eta)."""
    Ainv, eta = spd_inverse(A, jitter_start)
    return np.diag(Ainv).copy(), eta


def eigh_sorted(A) -> EigenSpectrum:
    """Symmetric eigendecomposition, eigenvalues descending.

    Ties keep the order the underlying routine produced (stable sort).
    """
    A = _check_symmetric(A)
    w, v = np.linalg.eigh(A)
    order = np.argsort(-w, kind="stable")
    return EigenSpectrum(values=w[order], vectors=v[:, order])
