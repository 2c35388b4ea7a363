"""Kernel families, shape matrices, and kernel derivative checks.

Expected values are either closed forms worked out by hand or
independent oracles (entrywise loops, central finite differences).
"""

import math

import numpy as np
import pytest

from kernelfuse import kernels
from kernelfuse.kernels import ShapeMatrix


def test_phi_hand_values():
    assert kernels.phi("ga", 1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert kernels.phi("m2", 1.0) == pytest.approx(2.0 * math.exp(-1.0), rel=1e-15)
    assert kernels.phi("m0", 0.0) == 1.0
    assert kernels.phi("ga", 0.0) == 1.0
    assert kernels.phi("m2", 0.0) == 1.0


def test_phi_vectorized_and_monotone():
    r = np.linspace(0.0, 5.0, 41)
    for fam in kernels.FAMILIES:
        vals = kernels.phi(fam, r)
        assert vals.shape == r.shape
        assert vals[0] == 1.0
        # all three families decay monotonically from 1 to 0
        assert np.all(np.diff(vals) < 0.0)
        assert np.all(vals > 0.0)


def test_phi_rejects_negative_radius():
    with pytest.raises(ValueError):
        kernels.phi("ga", -0.5)
    with pytest.raises(ValueError):
        kernels.phi("m2", np.array([0.1, -0.1]))


def test_phi_rejects_unknown_family():
    with pytest.raises(ValueError):
        kernels.phi("cubic", 1.0)


def test_phi_dq_hand_values():
    # d/dq of phi(sqrt(q)), worked out per family
    assert kernels.phi_dq("ga", 0.0) == pytest.approx(-1.0, rel=1e-15)
    assert kernels.phi_dq("m2", 1.0) == pytest.approx(-math.exp(-1.0) / 2.0, rel=1e-15)
    assert kernels.phi_dq("m0", 4.0) == pytest.approx(-math.exp(-2.0) / 4.0, rel=1e-15)
    assert kernels.phi_dq("ga", 2.0) == pytest.approx(-math.exp(-2.0), rel=1e-15)


@pytest.mark.parametrize("fam", ["ga", "m2", "m0"])
def test_phi_dq_matches_fd_on_phi(fam):
    # oracle: central differences of phi(sqrt(q)) in q
    qs = np.array([0.05, 0.3, 1.0, 2.7, 6.0])
    h = 1e-7
    fd = (kernels.phi(fam, np.sqrt(qs + h)) - kernels.phi(fam, np.sqrt(qs - h))) / (2 * h)
    got = kernels.phi_dq(fam, qs)
    assert np.max(np.abs(got - fd) / np.abs(fd)) < 1e-6


def test_phi_dq_clamps_near_zero():
    # m0 divides by sqrt(q); the clamp keeps the value finite
    v = kernels.phi_dq("m0", 0.0)
    assert np.isfinite(v)
    assert v < -1.0


def test_shape_matrix_constructors():
    iso = ShapeMatrix.isotropic(2.0, 3)
    assert iso.mode == "isotropic"
    assert iso.dim == 3
    np.testing.assert_array_equal(iso.matrix(), 2.0 * np.eye(3))

    diag = ShapeMatrix.diagonal([1.0, 3.0, 2.0])
    np.testing.assert_array_equal(diag.matrix(), np.diag([1.0, 3.0, 2.0]))

    m = np.array([[1.0, 1.0], [0.0, 1.0]])
    full = ShapeMatrix.full(m)
    np.testing.assert_array_equal(full.matrix(), m)


def test_shape_matrix_validation():
    with pytest.raises(ValueError):
        ShapeMatrix.isotropic(np.nan, 2)
    with pytest.raises(ValueError):
        ShapeMatrix.isotropic(1.0, 0)
    with pytest.raises(ValueError):
        ShapeMatrix.full(np.ones((2, 3)))
    with pytest.raises(ValueError):
        ShapeMatrix.diagonal(np.array([[1.0, 2.0]]))


def test_shape_matrix_theta():
    m = np.array([[1.0, 1.0], [0.0, 1.0]])
    full = ShapeMatrix.full(m)
    np.testing.assert_allclose(full.theta(), m.T @ m, rtol=0, atol=0)
    diag = ShapeMatrix.diagonal([2.0, 3.0])
    np.testing.assert_allclose(diag.theta(), np.diag([4.0, 9.0]), rtol=0, atol=0)


def test_shape_matrix_parameter_round_trip():
    rng = np.random.default_rng(0)
    for sigma in [
        ShapeMatrix.isotropic(0.7, 4),
        ShapeMatrix.diagonal(rng.uniform(0.1, 2.0, size=5)),
        ShapeMatrix.full(rng.normal(size=(3, 3))),
    ]:
        p = sigma.free_parameters()
        assert p.shape == (sigma.n_free,)
        back = sigma.with_parameters(p)
        np.testing.assert_array_equal(back.matrix(), sigma.matrix())
    assert ShapeMatrix.isotropic(1.0, 6).n_free == 1
    assert ShapeMatrix.diagonal(np.ones(6)).n_free == 6
    assert ShapeMatrix.full(np.eye(6)).n_free == 36


def test_eval_kernel_hand_values():
    # isotropic GA, eps=2, |x-z|=1: q = 4 -> exp(-4)
    iso = ShapeMatrix.isotropic(2.0, 2)
    x = np.array([1.0, 0.0])
    z = np.array([0.0, 0.0])
    assert kernels.eval_kernel("ga", iso, x, z) == pytest.approx(math.exp(-4.0), rel=1e-14)

    # diagonal m0, eps=(1,2), delta=(0,1): r = 2 -> exp(-2)
    diag = ShapeMatrix.diagonal([1.0, 2.0])
    assert kernels.eval_kernel("m0", diag, np.array([0.0, 1.0]), z) == pytest.approx(
        math.exp(-2.0), rel=1e-14
    )

    # full Sigma=[[1,1],[0,1]], delta=(1,1): Sigma delta=(2,1), q=5
    full = ShapeMatrix.full(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert kernels.eval_kernel("ga", full, np.array([1.0, 1.0]), z) == pytest.approx(
        math.exp(-5.0), rel=1e-14
    )
    # m2 on the same geometry: r = sqrt(5)
    r = math.sqrt(5.0)
    assert kernels.eval_kernel("m2", full, np.array([1.0, 1.0]), z) == pytest.approx(
        (1.0 + r) * math.exp(-r), rel=1e-14
    )


def test_eval_kernel_dim_mismatch():
    iso = ShapeMatrix.isotropic(1.0, 3)
    with pytest.raises(ValueError):
        kernels.eval_kernel("ga", iso, np.zeros(2), np.zeros(2))


def test_kernel_matrix_trivial_cases():
    iso = ShapeMatrix.isotropic(1.0, 2)
    K1 = kernels.kernel_matrix("ga", iso, np.zeros((1, 2)))
    np.testing.assert_array_equal(K1, np.ones((1, 1)))

    X = np.array([[0.5, 0.5], [0.5, 0.5]])
    K2 = kernels.kernel_matrix("m2", iso, X)
    np.testing.assert_array_equal(K2, np.ones((2, 2)))


@pytest.mark.parametrize("fam", ["ga", "m2", "m0"])
def test_kernel_matrix_matches_entrywise_oracle(fam):
    # oracle: per-pair eval_kernel loop; agreement must be bit-exact
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(8, 3))
    sigma = ShapeMatrix.full(rng.normal(size=(3, 3)) * 0.6)
    K = kernels.kernel_matrix(fam, sigma, X)
    for i in range(8):
        for j in range(8):
            assert K[i, j] == kernels.eval_kernel(fam, sigma, X[i], X[j])


@pytest.mark.parametrize("seed", range(4))
def test_kernel_matrix_symmetric_unit_diagonal(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(17, 4))
    sigma = ShapeMatrix.diagonal(rng.uniform(0.2, 2.0, size=4))
    K = kernels.kernel_matrix("m0", sigma, X)
    assert np.array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), np.ones(17))


@pytest.mark.parametrize("fam", ["ga", "m2", "m0"])
def test_kernel_matrix_psd_smoke(fam):
    rng = np.random.default_rng(11)
    X = rng.uniform(size=(25, 3))
    sigma = ShapeMatrix.isotropic(1.3, 3)
    K = kernels.kernel_matrix(fam, sigma, X)
    w = np.linalg.eigvalsh(K)
    assert w.min() >= -1e-10


def test_kernel_matrix_mode_consistency():
    # isotropic(eps) == diagonal(eps * ones) == full(eps * I), bit for bit
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(12, 5))
    eps = 0.8
    Ki = kernels.kernel_matrix("m2", ShapeMatrix.isotropic(eps, 5), X)
    Kd = kernels.kernel_matrix("m2", ShapeMatrix.diagonal(eps * np.ones(5)), X)
    Kf = kernels.kernel_matrix("m2", ShapeMatrix.full(eps * np.eye(5)), X)
    assert np.array_equal(Ki, Kd)
    assert np.array_equal(Ki, Kf)


def test_kernel_matrix_equals_unit_kernel_on_mapped_points():
    # kappa_Sigma(x, z) = kappa(Sigma x, Sigma z)
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(10, 3))
    sigma = ShapeMatrix.full(rng.normal(size=(3, 3)))
    unit = ShapeMatrix.isotropic(1.0, 3)
    K_direct = kernels.kernel_matrix("ga", sigma, X)
    K_mapped = kernels.kernel_matrix("ga", unit, sigma.map_points(X))
    np.testing.assert_allclose(K_direct, K_mapped, rtol=0, atol=1e-14)


def test_kernel_cross_matches_entrywise_oracle():
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(6, 3))
    Q = rng.uniform(size=(4, 3))
    sigma = ShapeMatrix.diagonal([0.5, 1.5, 1.0])
    C = kernels.kernel_cross("m2", sigma, Q, X)
    assert C.shape == (4, 6)
    for i in range(4):
        for j in range(6):
            assert C[i, j] == kernels.eval_kernel("m2", sigma, Q[i], X[j])


def _fd_kernel_grad(fam, sigma, X, h=1e-6):
    # oracle: central finite differences through the free parameters
    p0 = sigma.free_parameters()
    out = np.empty((sigma.n_free, X.shape[0], X.shape[0]))
    for k in range(sigma.n_free):
        pp = p0.copy()
        pp[k] += h
        pm = p0.copy()
        pm[k] -= h
        Kp = kernels.kernel_matrix(fam, sigma.with_parameters(pp), X)
        Km = kernels.kernel_matrix(fam, sigma.with_parameters(pm), X)
        out[k] = (Kp - Km) / (2 * h)
    return out


@pytest.mark.parametrize("fam", ["ga", "m2", "m0"])
@pytest.mark.parametrize("mode", ["isotropic", "diagonal", "full"])
def test_kernel_matrix_grad_sigma_matches_fd(fam, mode):
    rng = np.random.default_rng(13)
    X = rng.uniform(size=(6, 4))
    if mode == "isotropic":
        sigma = ShapeMatrix.isotropic(0.9, 4)
    elif mode == "diagonal":
        sigma = ShapeMatrix.diagonal(rng.uniform(0.4, 1.4, size=4))
    else:
        sigma = ShapeMatrix.full(np.eye(4) * 0.8 + rng.normal(size=(4, 4)) * 0.15)
    grads = kernels.kernel_matrix_grad_sigma(fam, sigma, X)
    fd = _fd_kernel_grad(fam, sigma, X)
    assert grads.shape == fd.shape
    scale = max(np.abs(fd).max(), 1e-12)
    assert np.abs(grads - fd).max() / scale < 1e-5


def test_kernel_matrix_grad_sigma_structure():
    rng = np.random.default_rng(21)
    X = rng.uniform(size=(7, 3))
    sigma = ShapeMatrix.full(rng.normal(size=(3, 3)) * 0.5)
    grads = kernels.kernel_matrix_grad_sigma("m0", sigma, X)
    assert grads.shape == (9, 7, 7)
    for g in grads:
        # each derivative matrix is symmetric with a zero diagonal
        np.testing.assert_allclose(g, g.T, rtol=0, atol=0)
        np.testing.assert_array_equal(np.diag(g), np.zeros(7))
