"""Batch distances, the nonlinear rank approximation (NRA) loss and triplet loss.

NRA works on a batch of ``m`` embeddings. For each anchor row ``i`` of the
distance matrix (self excluded) the distances are min-max scaled to ranks in
``[0, 1]``. The hardest positive (farthest same-label sample) and hardest
negative (closest other-label sample) ranks go through the transfer function
``w`` and the batch loss is::

    J = -1/m * sum_i [ log(1 - w(r_pos_i) + eps) + log(w(r_neg_i) + eps) ]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BatchCompositionError, DimensionError, DomainError

DEGENERATE_SPAN = 1e-12


@dataclass(frozen=True)
class NraConfig:
    alpha: float = 4.0
    epsilon: float = 1e-4

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.epsilon < 1:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class TripletConfig:
    margin: float = 0.0

    def __post_init__(self):
        if self.margin < 0:
            raise DomainError(f"margin must be non-negative, got {self.margin}")


@dataclass
class NraAux:
    """Per-row extrema and ranks from one NRA evaluation (arrays of length m)."""

    d_min: np.ndarray
    d_max: np.ndarray
    d_pos_max: np.ndarray
    d_neg_min: np.ndarray
    r_pos_max: np.ndarray
    r_neg_min: np.ndarray
    s_pos_max: np.ndarray
    s_neg_min: np.ndarray
    idx_min: np.ndarray
    idx_max: np.ndarray
    idx_pos_max: np.ndarray
    idx_neg_min: np.ndarray
    span: np.ndarray
    distances: np.ndarray


def _as_batch(embeddings) -> np.ndarray:
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"embeddings must be an m x dim array, got shape {X.shape}")
    return X


def pairwise_l2(embeddings) -> np.ndarray:
    """Euclidean distance matrix with an exactly zero diagonal."""
    X = _as_batch(embeddings)
    if X.shape[0] < 2:
        raise DimensionError("need at least two embeddings")
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(D, 0.0)
    return D


def nra_transfer(r, alpha: float):
    """Piecewise power transfer ``w(r; alpha)`` mapping [0, 1] onto [0, 1]."""
    r_arr = np.asarray(r, dtype=np.float64)
    if np.any((r_arr < 0) | (r_arr > 1)) or np.any(np.isnan(r_arr)):
        raise DomainError("ranks must lie in [0, 1]")
    low = 0.5 * (2.0 * r_arr) ** alpha
    high = 1.0 - 0.5 * (2.0 * (1.0 - r_arr)) ** alpha
    w = np.where(r_arr < 0.5, low, high)
    return float(w) if np.ndim(r) == 0 else w


def nra_transfer_slope(r, alpha: float):
    r_arr = np.asarray(r, dtype=np.float64)
    low = alpha * (2.0 * r_arr) ** (alpha - 1)
    high = alpha * (2.0 * (1.0 - r_arr)) ** (alpha - 1)
    return np.where(r_arr < 0.5, low, high)


def _check_composition(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = labels.shape[0]
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(m, dtype=bool)
    pos = same & off_diag
    neg = ~same
    for i in range(m):
        if not pos[i].any():
            raise BatchCompositionError(i, "positive")
        if not neg[i].any():
            raise BatchCompositionError(i, "negative")
    return pos, neg


def _masked_argmax(D: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # np.argmax/argmin return the first index on ties
    return np.argmax(np.where(mask, D, -np.inf), axis=1)


def _masked_argmin(D: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.argmin(np.where(mask, D, np.inf), axis=1)


def nra_loss(embeddings, labels: Sequence, cfg: NraConfig = NraConfig()) -> tuple[float, NraAux]:
    """NRA loss of one batch and the per-row quantities behind it."""
    X = _as_batch(embeddings)
    labels = np.asarray(labels)
    m = X.shape[0]
    if labels.shape != (m,):
        raise DimensionError(f"expected {m} labels, got shape {labels.shape}")
    if m < 2:
        raise DimensionError("need at least two embeddings")
    pos, neg = _check_composition(labels)
    D = pairwise_l2(X)
    others = ~np.eye(m, dtype=bool)
    rows = np.arange(m)

    i_min = _masked_argmin(D, others)
    i_max = _masked_argmax(D, others)
    i_pos = _masked_argmax(D, pos)
    i_neg = _masked_argmin(D, neg)
    d_min, d_max = D[rows, i_min], D[rows, i_max]
    d_pos, d_neg = D[rows, i_pos], D[rows, i_neg]

    span = np.maximum(d_max - d_min, DEGENERATE_SPAN)
    r_pos = np.clip((d_pos - d_min) / span, 0.0, 1.0)
    r_neg = np.clip((d_neg - d_min) / span, 0.0, 1.0)
    s_pos = 1.0 - nra_transfer(r_pos, cfg.alpha)
    s_neg = 1.0 - nra_transfer(r_neg, cfg.alpha)

    eps = cfg.epsilon
    J = -np.mean(np.log(s_pos + eps) + np.log(1.0 - s_neg + eps))
    aux = NraAux(d_min, d_max, d_pos, d_neg, r_pos, r_neg, s_pos, s_neg,
                 i_min, i_max, i_pos, i_neg, span, D)
    return float(J), aux


def nra_loss_grad(embeddings, labels: Sequence, cfg: NraConfig = NraConfig()) -> np.ndarray:
    """Gradient of :func:`nra_loss` with respect to every embedding.

    The extremal index picked in each row is held fixed, so the loss is a
    smooth function of the four selected distances per row. Ties resolve to
    the first index in row order. Where a row is degenerate (span below
    ``DEGENERATE_SPAN``) the guarded span is treated as a constant.
    """
    X = _as_batch(embeddings)
    _, aux = nra_loss(X, labels, cfg)
    m = X.shape[0]
    eps = cfg.epsilon
    rows = np.arange(m)

    # dJ/dr for the hardest positive and hardest negative of each row
    w_pos = 1.0 - aux.s_pos_max
    w_neg = 1.0 - aux.s_neg_min
    g_rpos = nra_transfer_slope(aux.r_pos_max, cfg.alpha) / (1.0 - w_pos + eps) / m
    g_rneg = -nra_transfer_slope(aux.r_neg_min, cfg.alpha) / (w_neg + eps) / m

    live = (aux.d_max - aux.d_min) >= DEGENERATE_SPAN
    span = aux.span
    G = np.zeros((m, m))
    for g_r, r, idx in ((g_rpos, aux.r_pos_max, aux.idx_pos_max),
                        (g_rneg, aux.r_neg_min, aux.idx_neg_min)):
        np.add.at(G, (rows, idx), g_r / span)
        np.add.at(G, (rows, aux.idx_min), np.where(live, g_r * (r - 1.0) / span, 0.0))
        np.add.at(G, (rows, aux.idx_max), np.where(live, -g_r * r / span, 0.0))

    D = aux.distances
    safe = np.where(D > 0, D, 1.0)
    coef = np.where(D > 0, G / safe, 0.0)
    # d D_ij / d x_i = (x_i - x_j) / D_ij, and the opposite sign for x_j
    grad = coef.sum(axis=1)[:, None] * X - coef @ X
    grad += coef.sum(axis=0)[:, None] * X - coef.T @ X
    return grad


def triplet_loss(d_ap: float, d_an: float, cfg: TripletConfig = TripletConfig()) -> float:
    """Hinge on squared distances: ``max(0, d_ap^2 - d_an^2 + margin)``."""
    if d_ap < 0 or d_an < 0:
        raise DomainError("distances must be non-negative")
    return max(0.0, d_ap * d_ap - d_an * d_an + cfg.margin)
