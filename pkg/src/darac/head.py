"""Learned aggregation head over the pooled regional matrix.

Pipeline per sample, with ``P`` the ``(rows, C)`` pooled matrix::

    A = W1 @ P + b1[:, None]        (L_head, C)
    Z = relu(A)
    N = (Z - mean) / sqrt(max(var, eps))
    o = W2 @ N + b2                 (C,)

``mean`` and ``var`` are per-(j, c) statistics across the batch in train
mode and the running estimates in infer mode. The normalization carries no
learnable scale or shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ContractError, DimensionError

POOLED_ROWS = 42
LEARNABLE = ("layer1_weights", "layer1_bias", "layer2_weights", "layer2_bias")


def head_param_count(L_head: int) -> int:
    """Learnable parameters of a head with ``L_head`` first-layer kernels."""
    if L_head < 1:
        raise ContractError(f"L_head must be >= 1, got {L_head}")
    return 43 * L_head + L_head + 1


@dataclass
class HeadParams:
    layer1_weights: np.ndarray  # (L_head, rows)
    layer1_bias: np.ndarray  # (L_head,)
    layer2_weights: np.ndarray  # (L_head,)
    layer2_bias: np.ndarray  # (1,)
    bn_running_mean: np.ndarray  # (L_head, C)
    bn_running_var: np.ndarray  # (L_head, C)
    bn_epsilon: float = 1e-5
    bn_momentum: float = 0.99

    @property
    def L_head(self) -> int:
        return self.layer1_weights.shape[0]

    @property
    def rows(self) -> int:
        return self.layer1_weights.shape[1]

    @property
    def channels(self) -> int:
        return self.bn_running_mean.shape[1]

    def learnable(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in LEARNABLE}

    def num_learnable(self) -> int:
        return sum(a.size for a in self.learnable().values())

    def copy(self) -> "HeadParams":
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            kw[f.name] = v.copy() if isinstance(v, np.ndarray) else v
        return HeadParams(**kw)


@dataclass
class HeadGradients:
    layer1_weights: np.ndarray
    layer1_bias: np.ndarray
    layer2_weights: np.ndarray
    layer2_bias: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in LEARNABLE}


@dataclass
class HeadForwardCache:
    inputs: np.ndarray  # (B, rows, C)
    pre_activation: np.ndarray  # (B, L, C)
    activation: np.ndarray  # (B, L, C)
    mean: np.ndarray  # (L, C)
    var: np.ndarray  # (L, C)
    scale: np.ndarray  # (L, C), sqrt(max(var, eps))
    guarded: np.ndarray  # (L, C) bool, var < eps
    normalized: np.ndarray  # (B, L, C)
    layer2_weights: np.ndarray = field(repr=False)
    mode: str = "train"


def head_init(L_head: int, C: int, rng: np.random.Generator, rows: int = POOLED_ROWS) -> HeadParams:
    """Uniform fan-in initialization, zero biases, running stats 0 / 1."""
    if L_head < 1 or C < 1:
        raise ContractError(f"L_head and C must be >= 1, got {L_head}, {C}")
    a1 = 1.0 / np.sqrt(rows)
    a2 = 1.0 / np.sqrt(L_head)
    return HeadParams(
        layer1_weights=rng.uniform(-a1, a1, size=(L_head, rows)),
        layer1_bias=np.zeros(L_head),
        layer2_weights=rng.uniform(-a2, a2, size=L_head),
        layer2_bias=np.zeros(1),
        bn_running_mean=np.zeros((L_head, C)),
        bn_running_var=np.ones((L_head, C)),
    )


def _stack(batch, params: HeadParams) -> np.ndarray:
    P = np.asarray(batch, dtype=np.float64)
    if P.ndim == 2:
        P = P[None]
    if P.ndim != 3 or P.shape[0] == 0:
        raise DimensionError(f"batch must be a non-empty (B, rows, C) array, got {P.shape}")
    if P.shape[1:] != (params.rows, params.channels):
        raise DimensionError(
            f"pooled matrices must be {params.rows}x{params.channels}, got {P.shape[1]}x{P.shape[2]}"
        )
    return P


def head_forward(batch, params: HeadParams, mode: str = "train"):
    """Embed a batch of pooled matrices.

    Parameters
    ----------
    batch : array_like, shape (B, rows, C)
    params : HeadParams
        In train mode the running statistics are updated in place.
    mode : {"train", "infer"}

    Returns
    -------
    embeddings : ndarray, shape (B, C)
    cache : HeadForwardCache
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    P = _stack(batch, params)
    B = P.shape[0]
    A = np.einsum("jr,brc->bjc", params.layer1_weights, P) + params.layer1_bias[None, :, None]
    Z = np.maximum(A, 0.0)
    eps = params.bn_epsilon
    if mode == "train":
        if B < 2:
            raise ContractError("train mode needs a batch of at least 2 samples")
        mean = Z.mean(axis=0)
        var = Z.var(axis=0)
        m = params.bn_momentum
        params.bn_running_mean[...] = m * params.bn_running_mean + (1 - m) * mean
        params.bn_running_var[...] = m * params.bn_running_var + (1 - m) * var
    else:
        mean = params.bn_running_mean.copy()
        var = params.bn_running_var.copy()
    guarded = var < eps
    scale = np.sqrt(np.maximum(var, eps))
    N = (Z - mean) / scale
    out = np.einsum("j,bjc->bc", params.layer2_weights, N) + params.layer2_bias[0]
    cache = HeadForwardCache(P, A, Z, mean, var, scale, guarded, N, params.layer2_weights.copy(), mode)
    return out, cache


def head_backward(cache: HeadForwardCache, grad_embeddings) -> HeadGradients:
    """Parameter gradients of a train-mode forward pass.

    Includes the dependence of the batch mean and variance on every sample.
    Where the variance guard was active the scale is a constant, so only the
    mean term contributes. The ReLU derivative at 0 is taken as 0.
    """
    if cache.mode != "train":
        raise ContractError("head_backward needs the cache of a train-mode forward pass")
    g = np.asarray(grad_embeddings, dtype=np.float64)
    B, L, C = cache.normalized.shape
    if g.shape != (B, C):
        raise ContractError(f"upstream gradient must be {B}x{C}, got {g.shape}")
    N = cache.normalized
    d_w2 = np.einsum("bc,bjc->j", g, N)
    d_b2 = np.array([g.sum()])
    dN = cache.layer2_weights[None, :, None] * g[:, None, :]
    dN_mean = dN.mean(axis=0)
    dNN_mean = (dN * N).mean(axis=0)
    full = dN - dN_mean - N * dNN_mean
    centred_only = dN - dN_mean
    dZ = np.where(cache.guarded, centred_only, full) / cache.scale
    dA = dZ * (cache.pre_activation > 0)
    d_w1 = np.einsum("bjc,brc->jr", dA, cache.inputs)
    d_b1 = dA.sum(axis=(0, 2))
    return HeadGradients(d_w1, d_b1, d_w2, d_b2)


def embed(batch, params: HeadParams) -> np.ndarray:
    """Infer-mode embeddings for a ``(B, rows, C)`` batch."""
    return head_forward(batch, params, mode="infer")[0]
