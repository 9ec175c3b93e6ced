"""Class-balanced batches, a frozen toy extractor and the head training loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import ContractError, DaracError, DimensionError
from .head import POOLED_ROWS, HeadGradients, HeadParams, head_backward, head_forward, head_init
from .losses import NraConfig, nra_loss, nra_loss_grad
from .pooling import pooled_matrix
from .regions import darac_grid
from .tensors import FeatureMapSet, make_rng

log = logging.getLogger(__name__)


class TrainingDiverged(DaracError, ArithmeticError):
    pass


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class Item:
    name: str
    label: Any
    data: Any  # FeatureMapSet or an H x W (x 3) image array


class LabeledDataset:
    """Items grouped by class; classes with fewer than ``min_per_class`` items are dropped."""

    def __init__(self, items: Sequence[Item], min_per_class: int = 1):
        counts: dict = {}
        for it in items:
            counts[it.label] = counts.get(it.label, 0) + 1
        self.items = tuple(it for it in items if counts[it.label] >= min_per_class)
        self.class_index: dict = {}
        for i, it in enumerate(self.items):
            self.class_index.setdefault(it.label, []).append(i)
        self.classes = sorted(self.class_index, key=str)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> Item:
        return self.items[i]

    @property
    def names(self) -> list[str]:
        return [it.name for it in self.items]

    @property
    def labels(self) -> list:
        return [it.label for it in self.items]


@dataclass(frozen=True)
class BatchSpec:
    k: int = 16
    n: int = 4

    def __post_init__(self):
        if self.k < 2 or self.n < 2:
            raise ContractError(f"batches need k >= 2 and n >= 2, got k={self.k} n={self.n}")

    @property
    def m(self) -> int:
        return self.k * self.n


def build_batch(ds: LabeledDataset, spec: BatchSpec, rng: np.random.Generator) -> list[int]:
    """Indices of ``k`` random classes times ``n`` random members each.

    Classes and members are drawn without replacement. The result is laid
    out in class blocks.
    """
    eligible = [c for c in ds.classes if len(ds.class_index[c]) >= spec.n]
    if len(eligible) < spec.k:
        raise ContractError(
            f"batch needs {spec.k} classes with >= {spec.n} items, dataset has {len(eligible)}"
        )
    chosen = rng.choice(len(eligible), size=spec.k, replace=False)
    out = []
    for ci in chosen:
        members = ds.class_index[eligible[ci]]
        picks = rng.choice(len(members), size=spec.n, replace=False)
        out.extend(members[p] for p in picks)
    return out


# --------------------------------------------------------------------------
# images


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    zoom = (out_h / img.shape[0], out_w / img.shape[1]) + (1,) * (img.ndim - 2)
    out = ndimage.zoom(img, zoom, order=1, mode="nearest", grid_mode=True)
    return out[:out_h, :out_w]


def resize_short_side(image: np.ndarray, side: int) -> np.ndarray:
    h, w = image.shape[:2]
    if h <= w:
        return resize_bilinear(image, side, max(1, round(w * side / h)))
    return resize_bilinear(image, max(1, round(h * side / w)), side)


# full-size augmentation: short side to 320, then a 299 square crop
AUGMENT_SMALL_SIDE = 320
AUGMENT_CROP_SIDE = 299


def augment(image, target_small_side: int = AUGMENT_SMALL_SIDE, crop_side=AUGMENT_CROP_SIDE,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Resize, random crop and random horizontal flip.

    ``crop_side`` is normally an int (square crop); an ``(h, w)`` pair gives a
    rectangular crop instead. ``rng`` is required; it only has a default
    so that the two sizes can.
    """
    if rng is None:
        raise ContractError("augment needs an explicit rng")
    ch, cw = (crop_side, crop_side) if np.isscalar(crop_side) else tuple(crop_side)
    if min(ch, cw) > target_small_side:
        raise ContractError(f"crop {ch}x{cw} exceeds the resized short side {target_small_side}")
    img = resize_short_side(image, target_small_side)
    h, w = img.shape[:2]
    if ch > h or cw > w:
        raise ContractError(f"crop {ch}x{cw} does not fit a {h}x{w} image")
    y = int(rng.integers(0, h - ch + 1))
    x = int(rng.integers(0, w - cw + 1))
    img = img[y:y + ch, x:x + cw]
    if rng.random() < 0.5:
        img = img[:, ::-1]
    return np.ascontiguousarray(img)


# --------------------------------------------------------------------------
# toy extractor


@dataclass(frozen=True)
class ToyExtractor:
    """Two fixed 3x3 convolutions, each followed by ReLU and stride-2 subsampling.

    Stands in for a pretrained backbone: weights are random but frozen, and
    the output spatial size is ``floor(floor(size / 2) / 2)``. Filters are
    bias-free with zero-sum taps, so flat areas give no response and a black
    image maps to all-zero features.
    """

    channels: int = 16
    hidden: int = 16
    in_channels: int = 3
    seed: int = 0
    weights: tuple = field(init=False, repr=False, compare=False)

    TOTAL_STRIDE = 4

    def __post_init__(self):
        rng = make_rng(self.seed)
        layers = []
        for cin, cout in ((self.in_channels, self.hidden), (self.hidden, self.channels)):
            w = rng.normal(size=(cout, cin, 3, 3)) / np.sqrt(9 * cin)
            w -= w.mean(axis=(1, 2, 3), keepdims=True)
            layers.append(w)
        object.__setattr__(self, "weights", tuple(layers))


def _conv_relu_stride2(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    # x: (Cin, H, W) -> (Cout, H // 2, W // 2), zero padding 1
    _, H, W = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(padded, (3, 3), axis=(1, 2))[:, : 2 * (H // 2) : 2, : 2 * (W // 2) : 2]
    out = np.einsum("chwij,ocij->ohw", win, w)
    return np.maximum(out, 0.0)


def toy_extract(image, extractor: ToyExtractor) -> FeatureMapSet:
    """Feature maps of an ``H x W x 3`` (or ``H x W``) image in ``[0, 255]``."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], extractor.in_channels, axis=2)
    if img.ndim != 3 or img.shape[2] != extractor.in_channels:
        raise DimensionError(f"expected an H x W x {extractor.in_channels} image, got {img.shape}")
    s = extractor.TOTAL_STRIDE
    if img.shape[0] < s or img.shape[1] < s:
        raise DimensionError(f"image {img.shape[1]}x{img.shape[0]} is smaller than the stride {s}")
    x = img.transpose(2, 0, 1) / 255.0
    for w in extractor.weights:
        x = _conv_relu_stride2(x, w)
    return FeatureMapSet(x)


def darac_pooled(fm: FeatureMapSet) -> np.ndarray:
    """42 x C pooled matrix over the global-plus-R-MAC grid of ``fm``.

    The head expects 21 areas, which the grid only yields for non-square
    maps large enough that no windows coincide (for example 16 x 12).
    """
    grid = darac_grid(fm.width, fm.height)
    if 2 * len(grid) != POOLED_ROWS:
        raise DimensionError(
            f"a {fm.width}x{fm.height} feature map gives {len(grid)} areas, the head needs {POOLED_ROWS // 2}; "
            "use a larger, non-square input"
        )
    return pooled_matrix(fm, grid)


# --------------------------------------------------------------------------
# optimisation


@dataclass
class OptimizerState:
    learning_rate: float = 1e-4
    momentum: float = 0.9
    velocity: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ContractError(f"momentum must lie in [0, 1), got {self.momentum}")


def sgd_step(params: HeadParams, grads: HeadGradients, state: OptimizerState) -> tuple[HeadParams, OptimizerState]:
    """Heavy-ball update ``v = mu v + g; p = p - lr v`` on the learnable arrays.

    Updates ``params`` and ``state`` in place and returns both.
    """
    for name, g in grads.as_dict().items():
        p = getattr(params, name)
        if p.shape != g.shape:
            raise ContractError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
        elif v.shape != p.shape:
            raise ContractError(f"velocity for {name} has shape {v.shape}, parameter {p.shape}")
        v = state.momentum * v + g
        state.velocity[name] = v
        p -= state.learning_rate * v
    return params, state


# --------------------------------------------------------------------------
# loop


@dataclass
class TrainConfig:
    seed: int = 0
    k: int = 16
    n: int = 4
    steps: int = 100
    learning_rate: float = 1e-4
    momentum: float = 0.9
    alpha: float = 4.0
    epsilon: float = 1e-4
    L_head: int = 16
    C: int = 16
    dataset_path: str | None = None
    checkpoint_path: str | None = None
    extractor_seed: int = 0
    augment: bool = False
    resize_side: int = 52
    crop_side: tuple[int, int] | None = None
    resume_path: str | None = None


def pooled_dataset(ds: LabeledDataset, extractor: ToyExtractor | None = None) -> np.ndarray:
    """Pooled matrices for every item; images go through ``extractor`` first."""
    mats = []
    for it in ds.items:
        fm = it.data if isinstance(it.data, FeatureMapSet) else toy_extract(it.data, extractor)
        mats.append(darac_pooled(fm))
    return np.stack(mats)


def train(
    cfg: TrainConfig,
    dataset: LabeledDataset,
    params: HeadParams | None = None,
    pooled: np.ndarray | None = None,
) -> tuple[HeadParams, list[float]]:
    """Fit the head with NRA loss on class-balanced batches.

    Each step draws a batch, pools it over the 21-region grid, runs a
    train-mode forward pass and an SGD-with-momentum update. The backbone
    stays frozen. ``pooled`` may carry precomputed matrices for the dataset
    (ignored when augmenting). Returns the trained parameters and the loss
    of every step.
    """
    spec = BatchSpec(cfg.k, cfg.n)
    nra = NraConfig(cfg.alpha, cfg.epsilon)
    rng = make_rng(cfg.seed)
    if params is None:
        params = head_init(cfg.L_head, cfg.C, rng)
    else:
        params = params.copy()
    extractor = ToyExtractor(channels=cfg.C, seed=cfg.extractor_seed)
    if not cfg.augment and pooled is None:
        pooled = pooled_dataset(dataset, extractor)
    state = OptimizerState(cfg.learning_rate, cfg.momentum)
    labels = dataset.labels
    losses: list[float] = []
    for step in range(cfg.steps):
        idx = build_batch(dataset, spec, rng)
        if cfg.augment:
            crop = cfg.crop_side or _default_crop(dataset[idx[0]].data, cfg.resize_side)
            P = np.stack([
                darac_pooled(toy_extract(augment(dataset[i].data, cfg.resize_side, crop, rng), extractor))
                for i in idx
            ])
        else:
            P = pooled[idx]
        y = [labels[i] for i in idx]
        emb, cache = head_forward(P, params, mode="train")
        J, _ = nra_loss(emb, y, nra)
        if not np.isfinite(J):
            raise TrainingDiverged(f"non-finite loss {J} at step {step}")
        g = nra_loss_grad(emb, y, nra)
        sgd_step(params, head_backward(cache, g), state)
        losses.append(J)
        if step % 100 == 0:
            log.debug("step %d loss %.6f", step, J)
    return params, losses


def _default_crop(image, resize_side: int) -> tuple[int, int]:
    # keep the source aspect so the pooled grid keeps the same region count
    h, w = np.shape(image)[:2]
    side = int(round(resize_side * 12 / 13))
    if h <= w:
        return side, int(side * w / h)
    return int(side * h / w), side
