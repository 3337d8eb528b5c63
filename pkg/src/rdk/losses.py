"""Forward evaluators for the self-supervised and supervised depth losses.

These compute loss values only; there is no autograd here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DegenerateInputError,
    DepthMap,
    DimensionMismatchError,
    DisparityMap,
    DomainError,
    EmptyOverlapError,
    InvalidInputError,
    RgbImage,
    check_same_shape,
)

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
PE_ALPHA = 0.85
KL_EPS = 1e-12
ALLOWED_SCALES = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights of the multi-scale objective.

    ``alpha`` here weights the photometric term and is unrelated to the
    SSIM/L1 blend factor of :func:`photometric_pe`.
    """

    alpha: float = 1.0
    beta: float = 1e-3
    gamma: float = 1.0
    scales: tuple = ALLOWED_SCALES

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise InvalidInputError("loss weights must be nonnegative")
        scales = tuple(float(s) for s in self.scales)
        if not scales:
            raise InvalidInputError("at least one scale is required")
        if not set(scales) <= set(ALLOWED_SCALES):
            raise InvalidInputError(f"scales must be a subset of {ALLOWED_SCALES}")
        object.__setattr__(self, "scales", scales)


@dataclass(frozen=True)
class SilogParams:
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError("lambda must lie in [0, 1]")


def _box3(x: np.ndarray) -> np.ndarray:
    """3x3 mean over a reflection-padded H x W x C array."""
    h, w = x.shape[:2]
    p = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="reflect" if min(h, w) > 1 else "edge")
    acc = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            acc += p[dy : dy + h, dx : dx + w]
    return acc / 9.0


def ssim_map(a: RgbImage, b: RgbImage) -> np.ndarray:
    """Per-pixel, per-channel SSIM (H x W x 3) with 3x3 windows."""
    check_same_shape(a, b)
    x, y = a.data, b.data
    mu_x, mu_y = _box3(x), _box3(y)
    sigma_x = _box3(x * x) - mu_x**2
    sigma_y = _box3(y * y) - mu_y**2
    sigma_xy = _box3(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sigma_xy + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (sigma_x + sigma_y + SSIM_C2)
    return num / den


def ssim(a: RgbImage, b: RgbImage) -> float:
    return float(np.mean(ssim_map(a, b)))


def photometric_pe(a: RgbImage, b: RgbImage, alpha: float = PE_ALPHA) -> np.ndarray:
    """Per-pixel (alpha/2)(1 - SSIM) + (1 - alpha)|a - b|, channel-averaged."""
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError("alpha must lie in [0, 1]")
    check_same_shape(a, b)
    l1 = np.abs(a.data - b.data).mean(axis=2)
    if alpha == 0:
        return l1
    dssim = (1.0 - ssim_map(a, b)).mean(axis=2)
    return alpha / 2.0 * dssim + (1.0 - alpha) * l1


def min_reprojection(target: RgbImage, warped, alpha: float = PE_ALPHA) -> float:
    """Mean over pixels of the per-pixel minimum pe across source views."""
    warped = list(warped)
    if not warped:
        raise InvalidInputError("need at least one warped source view")
    stack = np.stack([photometric_pe(target, w, alpha) for w in warped])
    return float(stack.min(axis=0).mean())


def smoothness(disp: DisparityMap, image: RgbImage) -> float:
    """Edge-aware smoothness of mean-normalized disparity."""
    check_same_shape(disp, image)
    d = disp.values
    mean = d.mean()
    if not mean > 0:
        raise DegenerateInputError("disparity has zero mean")
    d = d / mean
    img = image.data
    total = 0.0
    if d.shape[1] > 1:
        gd = np.abs(d[:, :-1] - d[:, 1:])
        gi = np.abs(img[:, :-1] - img[:, 1:]).mean(axis=2)
        total += float(np.mean(gd * np.exp(-gi)))
    if d.shape[0] > 1:
        gd = np.abs(d[:-1, :] - d[1:, :])
        gi = np.abs(img[:-1, :] - img[1:, :]).mean(axis=2)
        total += float(np.mean(gd * np.exp(-gi)))
    return total


def _co_valid(*maps: DepthMap) -> np.ndarray:
    check_same_shape(*maps)
    valid = maps[0].valid.copy()
    for m in maps[1:]:
        valid &= m.valid
    if not valid.any():
        raise EmptyOverlapError("maps share no valid pixel")
    return valid


def mixed_depth_center(d: DepthMap, d_aug1: DepthMap, d_aug2: DepthMap) -> DepthMap:
    valid = _co_valid(d, d_aug1, d_aug2)
    mix = (d.values + d_aug1.values + d_aug2.values) / 3.0
    return DepthMap(np.where(valid, mix, 0.0), valid)


def _as_distribution(values: np.ndarray) -> np.ndarray:
    if np.any(values <= 0):
        raise DomainError("depth values must be positive")
    return np.maximum(values / values.sum(), KL_EPS)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * np.log(p / q)))


def js_triplet_loss(d: DepthMap, d_aug1: DepthMap, d_aug2: DepthMap) -> float:
    """Mean KL of each sum-normalized map to their average.

    Only pixels valid in all three maps take part.
    """
    valid = _co_valid(d, d_aug1, d_aug2)
    ps = [_as_distribution(m.values[valid]) for m in (d, d_aug1, d_aug2)]
    # written as an offset from ps[0] so identical inputs give mix == ps[0] exactly
    mix = ps[0] + ((ps[1] - ps[0]) + (ps[2] - ps[0])) / 3.0
    # the loss is nonnegative in exact arithmetic; drop round-off below zero
    return max(sum(kl_divergence(p, mix) for p in ps) / 3.0, 0.0)


def total_loss(per_scale, weights: LossWeights | None = None) -> float:
    """Mean over scales of alpha*L_p + beta*L_s + gamma*L_mix.

    ``per_scale`` holds one (lp, ls, lmix) triple for each entry of
    ``weights.scales``.
    """
    weights = weights or LossWeights()
    per_scale = [tuple(t) for t in per_scale]
    if not per_scale:
        raise InvalidInputError("no scales given")
    if len(per_scale) != len(weights.scales):
        raise DimensionMismatchError(
            f"{len(per_scale)} loss triples for {len(weights.scales)} scales"
        )
    terms = [weights.alpha * lp + weights.beta * ls + weights.gamma * lm for lp, ls, lm in per_scale]
    return float(sum(terms) / len(terms))


def silog(gt: DepthMap, pred: DepthMap, params: SilogParams | None = None) -> float:
    """sqrt(mean(g^2) - lam * mean(g)^2) with g = ln(pred) - ln(gt) on co-valid pixels."""
    params = params or SilogParams()
    valid = _co_valid(gt, pred)
    g = np.log(pred.values[valid]) - np.log(gt.values[valid])
    k = g.size
    value = np.sum(g * g) / k - params.lam * np.sum(g) ** 2 / k**2
    # rounding can push the radicand a hair below zero when lam == 1
    return float(np.sqrt(max(value, 0.0)))


def apr_loss(d: DepthMap, d_apr: DepthMap) -> float:
    """Mean absolute difference of the two disparities (inverse depths)."""
    valid = _co_valid(d, d_apr)
    return float(np.mean(np.abs(1.0 / d.values[valid] - 1.0 / d_apr.values[valid])))
