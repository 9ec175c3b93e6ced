import numpy as np
import pytest
from hypothesis import given, strategies as st

from darac import (
    ContractError,
    DimensionError,
    WhiteningModel,
    apply_whitening,
    fit_whitening,
    fuse_multiresolution,
    l2_normalize,
)
from darac.postprocess import whiten_raw


def test_l2_normalize_basic():
    assert np.allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])
    assert np.array_equal(l2_normalize([0.0, 0.0]), [0.0, 0.0])
    u = l2_normalize([1.0, 2.0, 2.0])
    assert np.allclose(l2_normalize(u), u, atol=1e-12)


def test_already_white_input(rng):
    Z = rng.normal(size=(4000, 3))
    # exact zero mean, identity covariance
    Z -= Z.mean(axis=0)
    L = np.linalg.cholesky(np.cov(Z, rowvar=False))
    Z = Z @ np.linalg.inv(L).T
    m = fit_whitening(Z)
    assert np.allclose(m.projection @ m.projection.T, np.eye(3), atol=1e-6)
    W = whiten_raw(m, Z)
    assert np.allclose(np.cov(W, rowvar=False), np.eye(3), atol=1e-6)


def test_stretched_axis(rng):
    X = rng.normal(size=(300, 2)) * [1.0, 10.0] + [5.0, -2.0]
    m = fit_whitening(X)
    W = whiten_raw(m, X)
    assert np.allclose(np.cov(W, rowvar=False), np.eye(2), atol=1e-6)
    # largest direction first
    ev = 1 / np.sum(m.projection**2, axis=1)
    assert ev[0] > ev[1]


def test_fewer_samples_than_dims(rng):
    m = fit_whitening(rng.normal(size=(3, 8)))
    assert np.all(np.isfinite(m.projection))
    assert np.all(np.isfinite(apply_whitening(m, rng.normal(size=8))))


def test_sign_convention(rng):
    m = fit_whitening(rng.normal(size=(50, 4)))
    for row in m.projection:
        nz = row[np.abs(row) > 1e-12]
        assert nz[0] > 0


def test_fit_reproducible(rng):
    X = rng.normal(size=(40, 6))
    a, b = fit_whitening(X), fit_whitening(X.copy())
    assert np.array_equal(a.projection, b.projection) and np.array_equal(a.mean, b.mean)


def test_fit_needs_two():
    with pytest.raises(ContractError):
        fit_whitening(np.ones((1, 3)))


def test_apply_at_mean_is_zero(rng):
    m = fit_whitening(rng.normal(size=(20, 3)))
    assert np.array_equal(apply_whitening(m, m.mean), np.zeros(3))


def test_identity_model():
    m = WhiteningModel(np.zeros(2), np.eye(2), 2)
    assert np.allclose(apply_whitening(m, [3.0, 4.0]), [0.6, 0.8])


def test_apply_dimension_mismatch(rng):
    m = fit_whitening(rng.normal(size=(20, 3)))
    with pytest.raises(DimensionError):
        apply_whitening(m, np.ones(4))


@given(st.integers(0, 2**32 - 1))
def test_apply_output_norm(seed):
    r = np.random.default_rng(seed)
    m = fit_whitening(r.normal(size=(30, 5)))
    n = np.linalg.norm(apply_whitening(m, r.normal(size=5)))
    assert n == 0 or abs(n - 1) <= 1e-12


def test_fuse_examples():
    u = l2_normalize([1.0, 2.0, 3.0])
    assert np.allclose(fuse_multiresolution([u, u, u]), u)
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert np.allclose(fuse_multiresolution([e1, e2]), np.array([1.0, 1.0]) / np.sqrt(2))
    assert np.allclose(fuse_multiresolution([u]), u)


def test_fuse_errors():
    with pytest.raises(ContractError):
        fuse_multiresolution([])
    with pytest.raises(DimensionError):
        fuse_multiresolution([np.ones(2), np.ones(3)])


def test_fuse_blocks_rowwise(rng):
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    F = fuse_multiresolution([A, B])
    for i in range(4):
        assert np.allclose(F[i], fuse_multiresolution([A[i], B[i]]))


@given(st.integers(0, 2**32 - 1), st.permutations(range(4)))
def test_fuse_permutation_invariant(seed, perm):
    vs = list(np.random.default_rng(seed).normal(size=(4, 6)))
    assert np.allclose(fuse_multiresolution(vs), fuse_multiresolution([vs[i] for i in perm]), atol=1e-12)
