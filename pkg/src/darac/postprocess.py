"""L2 normalization, PCA whitening and multi-resolution fusion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionError

NORM_FLOOR = 1e-12
EIGEN_FLOOR = 1e-10


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean length; near-zero vectors pass through."""
    v = np.asarray(v, dtype=np.float64)
    n = np.sqrt(np.sum(v * v))
    if n > NORM_FLOOR:
        return v / n
    return v.copy()


def l2_normalize_rows(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    n = np.sqrt(np.sum(X * X, axis=1, keepdims=True))
    return np.where(n > NORM_FLOOR, X / np.where(n > NORM_FLOOR, n, 1.0), X)


@dataclass(frozen=True)
class WhiteningModel:
    """Centering vector plus a ``C x C`` projection.

    Projection rows are principal directions (descending eigenvalue) scaled
    by the inverse square root of their eigenvalue.
    """

    mean: np.ndarray
    projection: np.ndarray
    fit_count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __post_init__(self):
        C = np.shape(self.mean)[0]
        if np.shape(self.projection) != (C, C):
            raise DimensionError(f"projection must be {C}x{C}, got {np.shape(self.projection)}")
        if self.fit_count < 2:
            raise ContractError("a whitening model needs fit_count >= 2")


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # columns are eigenvectors; make the first clearly nonzero entry positive
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


def fit_whitening(samples) -> WhiteningModel:
    """PCA whitening fitted on row vectors ``samples`` (N x C).

    Covariance uses the ``N - 1`` divisor. Eigenvalues are floored at
    ``EIGEN_FLOOR`` before the inverse square root, so rank-deficient fit
    sets still give a finite projection. All C components are kept.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"samples must be an N x C array, got shape {X.shape}")
    if X.shape[0] < 2:
        raise ContractError(f"whitening needs at least 2 samples, got {X.shape[0]}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], EIGEN_FLOOR)
    evecs = _fix_signs(evecs[:, order].copy())
    projection = evecs.T / np.sqrt(evals)[:, None]
    return WhiteningModel(mean, projection, X.shape[0])


def whiten_raw(model: WhiteningModel, X) -> np.ndarray:
    """Centered projection without the final normalization (rows of ``X``)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.dim:
        raise DimensionError(f"expected dimension {model.dim}, got {X.shape[-1]}")
    return (X - model.mean) @ model.projection.T


def apply_whitening(model: WhiteningModel, v) -> np.ndarray:
    return l2_normalize(whiten_raw(model, v))


def apply_whitening_rows(model: WhiteningModel, X) -> np.ndarray:
    return l2_normalize_rows(whiten_raw(model, np.atleast_2d(X)))


def fuse_multiresolution(descriptors: Sequence) -> np.ndarray:
    """Sum per-resolution descriptors and renormalize.

    Entries may be single vectors or aligned ``N x C`` blocks; blocks are
    normalized row by row.
    """
    if len(descriptors) == 0:
        raise ContractError("cannot fuse an empty list of descriptors")
    arrs = [np.asarray(d, dtype=np.float64) for d in descriptors]
    if any(a.shape != arrs[0].shape for a in arrs):
        raise DimensionError("descriptors to fuse must share one dimension")
    total = arrs[0].copy()
    for a in arrs[1:]:
        total = total + a
    if total.ndim == 2:
        return l2_normalize_rows(total)
    return l2_normalize(total)
