"""Spatial-domain augmentations.

Every stochastic function takes an explicit ``numpy.random.Generator`` and
consumes it in a fixed, documented order so results are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidInputError,
    RgbImage,
    check_same_shape,
)
from .geometry import affine_grid, rotation_about_center, sample_bilinear

# Ops removed from the AutoAugment/AugMix pool because they resemble the test corruptions.
EXCLUDED_OPS = frozenset({"contrast", "color", "brightness", "sharpness", "cutout"})
_EXCLUDED_FRAGMENTS = ("noise", "blur")

MAX_ROTATE_DEG = 30.0
MAX_SHEAR = 0.3
MAX_TRANSLATE = 1.0 / 3.0


def _affine(image: RgbImage, matrix) -> RgbImage:
    return sample_bilinear(image, affine_grid(*image.shape, matrix), mode="zeros")[0]


def op_identity(image: RgbImage, magnitude: float) -> RgbImage:
    return image


def op_rotate(image: RgbImage, magnitude: float) -> RgbImage:
    h, w = image.shape
    return _affine(image, rotation_about_center(h, w, magnitude * MAX_ROTATE_DEG))


def op_shear_x(image: RgbImage, magnitude: float) -> RgbImage:
    s = magnitude * MAX_SHEAR
    return _affine(image, [[1.0, s, 0.0], [0.0, 1.0, 0.0]])


def op_shear_y(image: RgbImage, magnitude: float) -> RgbImage:
    s = magnitude * MAX_SHEAR
    return _affine(image, [[1.0, 0.0, 0.0], [s, 1.0, 0.0]])


def op_translate_x(image: RgbImage, magnitude: float) -> RgbImage:
    return _affine(image, [[1.0, 0.0, magnitude * MAX_TRANSLATE * image.width], [0.0, 1.0, 0.0]])


def op_translate_y(image: RgbImage, magnitude: float) -> RgbImage:
    return _affine(image, [[1.0, 0.0, 0.0], [0.0, 1.0, magnitude * MAX_TRANSLATE * image.height]])


# name -> op(image, magnitude in [-1, 1])
OPS = {
    "identity": op_identity,
    "rotate": op_rotate,
    "shear_x": op_shear_x,
    "shear_y": op_shear_y,
    "translate_x": op_translate_x,
    "translate_y": op_translate_y,
}
DEFAULT_OP_SET = ("rotate", "shear_x", "shear_y", "translate_x", "translate_y")


def is_excluded_op(name: str) -> bool:
    lname = name.lower()
    return lname in EXCLUDED_OPS or any(f in lname for f in _EXCLUDED_FRAGMENTS)


@dataclass(frozen=True)
class ChainConfig:
    k: int = 3
    depth_range: tuple = (1, 3)
    dirichlet_alpha: float = 1.0
    beta_params: tuple = (1.0, 1.0)
    op_set: tuple = DEFAULT_OP_SET

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be at least 1")
        lo, hi = self.depth_range
        if not 1 <= lo <= hi <= 3:
            raise InvalidInputError("depth_range must lie within [1, 3]")
        if self.dirichlet_alpha <= 0 or min(self.beta_params) <= 0:
            raise InvalidInputError("Dirichlet and Beta parameters must be positive")
        ops = tuple(self.op_set)
        if not ops:
            raise InvalidInputError("op_set is empty")
        for name in ops:
            if is_excluded_op(name):
                raise InvalidInputError(f"operation {name!r} is excluded from augmentation chains")
            if name not in OPS:
                raise InvalidInputError(f"unknown operation {name!r}")
        object.__setattr__(self, "op_set", ops)
        object.__setattr__(self, "depth_range", (int(lo), int(hi)))
        object.__setattr__(self, "beta_params", tuple(float(b) for b in self.beta_params))


@dataclass(frozen=True)
class AugMixTrace:
    image: RgbImage
    weights: np.ndarray
    m: float
    chains: list = field(default_factory=list)


def augmix_detailed(
    image: RgbImage, cfg: ChainConfig, rng: np.random.Generator, m: float | None = None
) -> AugMixTrace:
    """AugMix with the sampled weights and chains exposed.

    Draw order: Dirichlet weights, Beta mixing weight (drawn even when ``m``
    overrides it), then for each chain its length followed by one
    (op, magnitude) pair per step.
    """
    weights = rng.dirichlet([cfg.dirichlet_alpha] * cfg.k)
    m_drawn = float(rng.beta(*cfg.beta_params))
    m = m_drawn if m is None else float(m)
    if not 0.0 <= m <= 1.0:
        raise InvalidInputError("m must lie in [0, 1]")
    lo, hi = cfg.depth_range
    mixture = np.zeros_like(image.data)
    chains = []
    for w in weights:
        depth = int(rng.integers(lo, hi + 1))
        out = image
        steps = []
        for _ in range(depth):
            name = cfg.op_set[int(rng.integers(len(cfg.op_set)))]
            magnitude = float(rng.uniform(-1.0, 1.0))
            out = OPS[name](out, magnitude)
            steps.append((name, magnitude))
        chains.append(steps)
        mixture += w * out.data
    mixed = (1.0 - m) * image.data + m * mixture
    return AugMixTrace(RgbImage.clipped(mixed), weights, m, chains)


def augmix(
    image: RgbImage, cfg: ChainConfig | None = None, rng=None, m: float | None = None
) -> RgbImage:
    """Convexly mix k random op chains, then blend with the clean image."""
    rng = rng if rng is not None else np.random.default_rng()
    return augmix_detailed(image, cfg or ChainConfig(), rng, m).image


def swap_rows(array: np.ndarray, split_row: int) -> np.ndarray:
    """Rows split_row..H followed by rows 0..split_row (works for images and depth)."""
    h = array.shape[0]
    if not 0 < split_row < h:
        raise InvalidInputError(f"split_row must lie in (0, {h}), got {split_row}")
    return np.concatenate([array[split_row:], array[:split_row]], axis=0)


def cutflip(
    image: RgbImage,
    split_row: int | None = None,
    rng: np.random.Generator | None = None,
    probability: float = 0.5,
) -> RgbImage:
    """Swap the parts above and below a horizontal cut with the given probability.

    Draws one uniform for the apply decision, then (only if no ``split_row``
    is given) the split row uniformly from 1..H-1.
    """
    if not 0.0 <= probability <= 1.0:
        raise InvalidInputError("probability must lie in [0, 1]")
    h = image.height
    if split_row is not None and not 0 < split_row < h:
        raise InvalidInputError(f"split_row must lie in (0, {h}), got {split_row}")
    rng = rng if rng is not None else np.random.default_rng()
    apply = rng.random() < probability
    if split_row is None:
        if h < 2:
            return image
        split_row = int(rng.integers(1, h))
    if not apply:
        return image
    return RgbImage(swap_rows(image.data, split_row))


def image_mix(a: RgbImage, b: RgbImage, alpha: float) -> RgbImage:
    """(1 - alpha) * a + alpha * b."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError("alpha must lie in [0, 1]")
    check_same_shape(a, b)
    return RgbImage.clipped((1.0 - alpha) * a.data + alpha * b.data)


@dataclass(frozen=True)
class MixConfig:
    alpha: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError("alpha must lie in [0, 1]")


def patch_mask(
    height: int, width: int, patch: int, ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Pixel mask covering ceil(ratio * n_patches) patches chosen without replacement.

    The last row/column of patches is clipped at the image border.
    """
    if patch < 1:
        raise InvalidInputError("patch must be at least 1")
    if not 0.0 <= ratio <= 1.0:
        raise InvalidInputError("mask ratio must lie in [0, 1]")
    ph, pw = -(-height // patch), -(-width // patch)
    n = ph * pw
    # tolerance keeps e.g. 0.3 * 10 from rounding up to 4
    n_masked = min(n, math.ceil(ratio * n - 1e-9))
    chosen = rng.choice(n, size=n_masked, replace=False)
    grid = np.zeros(n, dtype=bool)
    grid[chosen] = True
    grid = grid.reshape(ph, pw)
    return np.repeat(np.repeat(grid, patch, axis=0), patch, axis=1)[:height, :width]


def _box_blur(x: np.ndarray) -> np.ndarray:
    h, w = x.shape[:2]
    p = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    acc = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            acc += p[dy : dy + h, dx : dx + w]
    return acc / 9.0


class MeanFillBlur:
    """Stand-in reconstructor for masked images.

    Each masked patch is filled with the mean colour of the visible pixels in
    its 3x3 patch neighbourhood (falling back to the global visible mean, then
    mid-grey), and the result is box-blurred ``passes`` times.
    """

    def __init__(self, patch: int = 16, passes: int = 2):
        self.patch = patch
        self.passes = passes

    def __call__(self, masked: RgbImage, mask: np.ndarray) -> RgbImage:
        x = masked.data.copy()
        h, w = mask.shape
        p = self.patch
        visible = ~mask
        global_mean = x[visible].mean(axis=0) if visible.any() else np.full(3, 0.5)
        for py in range(0, h, p):
            for px in range(0, w, p):
                if not mask[py : py + p, px : px + p].any():
                    continue
                ys = slice(max(py - p, 0), min(py + 2 * p, h))
                xs = slice(max(px - p, 0), min(px + 2 * p, w))
                vis = visible[ys, xs]
                fill = x[ys, xs][vis].mean(axis=0) if vis.any() else global_mean
                block = mask[py : py + p, px : px + p]
                x[py : py + p, px : px + p][block] = fill
        for _ in range(self.passes):
            x = _box_blur(x)
        return RgbImage.clipped(x)


def mae_mix(
    x: RgbImage,
    reconstructor=None,
    mask_ratio: float = 0.5,
    patch: int = 16,
    alpha: float = 0.3,
    rng: np.random.Generator | None = None,
) -> RgbImage:
    """Blend an image with a reconstruction of its patch-masked version.

    ``reconstructor(masked_image, mask)`` must return an image of the same
    size; it defaults to :class:`MeanFillBlur`.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError("alpha must lie in [0, 1]")
    rng = rng if rng is not None else np.random.default_rng()
    mask = patch_mask(x.height, x.width, patch, mask_ratio, rng)
    masked = RgbImage(np.where(mask[..., None], 0.0, x.data))
    reconstructor = reconstructor or MeanFillBlur(patch)
    x_hat = reconstructor(masked, mask)
    x_hat = x_hat.data if isinstance(x_hat, RgbImage) else np.asarray(x_hat, dtype=np.float64)
    if x_hat.shape != x.data.shape:
        raise DimensionMismatchError(f"reconstruction has shape {x_hat.shape}, expected {x.data.shape}")
    return RgbImage.clipped((1.0 - alpha) * x.data + alpha * np.clip(x_hat, 0.0, 1.0))


@dataclass(frozen=True)
class SdaConfig:
    n_masks: int = 12
    mask_len: int = 120

    def __post_init__(self):
        if self.n_masks < 0 or self.mask_len < 1:
            raise InvalidInputError("need n_masks >= 0 and mask_len >= 1")


def sda_union_mask(height: int, width: int, corners, mask_len: int) -> np.ndarray:
    """OR of a x a squares anchored at (x, y) top-left corners, clipped to the image."""
    mask = np.zeros((height, width), dtype=bool)
    for x0, y0 in corners:
        mask[y0 : y0 + mask_len, x0 : x0 + mask_len] = True
    return mask


def sda_corners(height: int, width: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n corners (x, y) uniform over every pixel of the image."""
    xs = rng.integers(0, width, size=n)
    ys = rng.integers(0, height, size=n)
    return np.stack([xs, ys], axis=1)


def sda_mask(
    image: RgbImage, cfg: SdaConfig | None = None, rng: np.random.Generator | None = None
) -> tuple[RgbImage, np.ndarray]:
    """Zero the union of N random a x a squares; returns (image, mask)."""
    cfg = cfg or SdaConfig()
    rng = rng if rng is not None else np.random.default_rng()
    corners = sda_corners(image.height, image.width, cfg.n_masks, rng)
    mask = sda_union_mask(image.height, image.width, corners, cfg.mask_len)
    return RgbImage(np.where(mask[..., None], 0.0, image.data)), mask


def l2_perturb(x: RgbImage, delta, epsilon: float) -> RgbImage:
    """Rescale ``delta`` to L2 norm ``epsilon``, add it and clamp to [0, 1]."""
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != x.data.shape:
        raise DimensionMismatchError("delta must match the image shape")
    norm = np.linalg.norm(delta.ravel())
    if not norm > 0 or not np.isfinite(norm):
        raise DegenerateInputError("perturbation direction has zero or non-finite norm")
    return RgbImage.clipped(x.data + delta * (epsilon / norm))


class BatchSource(str, Enum):
    CLEAN = "clean"
    CURRENT = "current_generator"
    REPLAY = "replay"


CLEAN_FRACTION = 0.5
CURRENT_FRACTION = 0.3


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def adversarial_batch_schedule(batch_size: int, rng: np.random.Generator) -> list[BatchSource]:
    """Shuffled labels: 50% clean, 30% current generator, the rest replayed generators."""
    if batch_size < 1:
        raise InvalidInputError("batch_size must be at least 1")
    n_clean = min(_round_half_up(CLEAN_FRACTION * batch_size), batch_size)
    n_current = min(_round_half_up(CURRENT_FRACTION * batch_size), batch_size - n_clean)
    n_replay = batch_size - n_clean - n_current
    labels = (
        [BatchSource.CLEAN] * n_clean
        + [BatchSource.CURRENT] * n_current
        + [BatchSource.REPLAY] * n_replay
    )
    return [labels[i] for i in rng.permutation(batch_size)]


def gaussian_noise_corruption(image: RgbImage, sigma: float, rng: np.random.Generator) -> RgbImage:
    """Additive Gaussian noise; a smoke-test corruption, never an augmentation op."""
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    return RgbImage.clipped(image.data + rng.normal(0.0, sigma, image.data.shape))
