"""Feature-tensor statistics: channel correlation and patch-median normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DegenerateInputError, DimensionMismatchError, InvalidInputError
from .io import read_raw_tensor, write_raw_tensor

SIGMA_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class FeatureTensor:
    """C x H x W real feature map."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3 or min(v.shape) < 1:
            raise InvalidInputError(f"expected C x H x W with every side >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("feature values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        return self.values.reshape(self.channels, -1)

    def save(self, path) -> None:
        write_raw_tensor(self.values, path)

    @classmethod
    def load(cls, path) -> "FeatureTensor":
        return cls(read_raw_tensor(path))


def channel_correlation(e: FeatureTensor, f: FeatureTensor) -> np.ndarray:
    """|cosine| between every flattened channel of ``e`` and of ``f`` (C_e x C_f).

    Spatial sizes must already agree (a C x L tensor can be passed as C x L x 1).
    """
    a, b = e.flat(), f.flat()
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"flattened channel lengths differ: {a.shape[1]} vs {b.shape[1]}"
        )
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise DegenerateInputError("a feature channel is identically zero")
    corr = np.abs((a / na[:, None]) @ (b / nb[:, None]).T)
    return np.minimum(corr, 1.0)


def patch_medians(channel: np.ndarray, patch: int = 4) -> np.ndarray:
    """Median of each patch x patch tile of a 2-D array; border tiles are clipped."""
    h, w = channel.shape
    out = [
        np.median(channel[y : y + patch, x : x + patch])
        for y in range(0, h, patch)
        for x in range(0, w, patch)
    ]
    return np.asarray(out)


def median_normalize(f: FeatureTensor, patch: int = 4) -> FeatureTensor:
    """Standardize each channel with the mean/std of its patch medians."""
    out = np.empty_like(f.values)
    for c, channel in enumerate(f.values):
        med = patch_medians(channel, patch)
        mu = med.mean()
        sigma = max(np.sqrt(np.mean((med - mu) ** 2)), SIGMA_FLOOR)
        out[c] = (channel - mu) / sigma
    return FeatureTensor(out)
