"""Domain types, depth/disparity conversion and pair alignment.

All image and map types are immutable wrappers around numpy arrays. The
arrays are copied on construction and marked read-only, so instances can be
shared across threads freely.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


class RdkError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(RdkError, ValueError):
    """An input violates a documented precondition."""


class DomainError(InvalidInputError):
    """A value lies outside the mathematical domain (e.g. nonpositive depth)."""


class DimensionMismatchError(InvalidInputError):
    pass


class EmptyOverlapError(RdkError, ValueError):
    """No pixel is valid in both maps of a pair."""


class DegenerateInputError(RdkError, ValueError):
    """Input is well-formed but makes the computation undefined."""


class DegeneratePredictionError(DegenerateInputError):
    pass


class EmptyCorpusError(RdkError, ValueError):
    pass


class FormatError(RdkError, ValueError):
    """A file does not follow the expected on-disk format."""


class UnknownLabelError(RdkError, KeyError):
    pass


def _frozen(array, dtype=np.float64) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class RgbImage:
    """H x W x 3 image with samples in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 3 or data.shape[2] != 3:
            raise InvalidInputError(f"expected an HxWx3 array, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError("image must be at least 1x1")
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise DomainError("image samples must be finite and lie in [0, 1]")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    @classmethod
    def clipped(cls, data) -> "RgbImage":
        """Build an image after clamping samples into [0, 1]."""
        return cls(np.clip(np.asarray(data, dtype=np.float64), 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Metric depth with a validity mask; values are positive where valid.

    Invalid pixels may hold any value (conventionally 0).
    """

    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise InvalidInputError(f"expected an HxW array, got shape {values.shape}")
        if self.valid is None:
            valid = np.ones(values.shape, dtype=bool)
        else:
            valid = np.asarray(self.valid, dtype=bool)
            if valid.shape != values.shape:
                raise DimensionMismatchError(
                    f"mask shape {valid.shape} differs from values shape {values.shape}"
                )
        vv = values[valid]
        if not np.all(np.isfinite(vv)) or np.any(vv <= 0):
            raise DomainError("depth must be finite and strictly positive where valid")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", _frozen(valid, dtype=bool))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_array(cls, values, invalid_value: float | None = 0.0) -> "DepthMap":
        """Treat ``invalid_value`` (and non-finite samples) as missing."""
        values = np.asarray(values, dtype=np.float64)
        valid = np.isfinite(values)
        if invalid_value is not None:
            valid &= values != invalid_value
        return cls(np.where(valid, values, 0.0), valid)


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Nonnegative inverse depth, known up to scale."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise InvalidInputError(f"expected an HxW array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("disparity contains non-finite samples")
        if np.any(values < 0):
            raise DomainError("disparity must be nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ValidPairView:
    """Co-valid gt/pred samples of one image, ready for scoring."""

    gt: np.ndarray
    pred: np.ndarray

    def __post_init__(self):
        gt = _frozen(self.gt).ravel()
        pred = _frozen(self.pred).ravel()
        if gt.shape != pred.shape:
            raise DimensionMismatchError("gt and pred must have equal length")
        if gt.size == 0:
            raise EmptyOverlapError("pair has no pixels")
        if np.any(gt <= 0) or np.any(pred <= 0):
            raise DomainError("pair entries must be strictly positive")
        object.__setattr__(self, "gt", gt)
        object.__setattr__(self, "pred", pred)

    def __len__(self) -> int:
        return self.gt.size


@dataclass(frozen=True)
class TrackDefaults:
    min_depth: float
    max_depth: float
    median_scale: bool
    divisor: float


TRACK_DEFAULTS = {
    1: TrackDefaults(min_depth=1e-3, max_depth=80.0, median_scale=True, divisor=256.0),
    2: TrackDefaults(min_depth=1e-3, max_depth=10.0, median_scale=False, divisor=1000.0),
}


def _check_range(min_depth: float, max_depth: float) -> None:
    if not min_depth > 0 or not max_depth > min_depth:
        raise InvalidInputError(
            f"need 0 < min_depth < max_depth, got {min_depth}, {max_depth}"
        )


def disparity_to_depth(
    disp: DisparityMap, min_depth: float = 1e-3, max_depth: float = 80.0
) -> DepthMap:
    """Reciprocal of disparity clamped into [min_depth, max_depth].

    Zero disparity maps to ``max_depth`` and stays valid, so the prediction
    covers every pixel.
    """
    _check_range(min_depth, max_depth)
    d = disp.values
    with np.errstate(divide="ignore"):
        depth = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), np.inf)
    return DepthMap(np.clip(depth, min_depth, max_depth))


def depth_to_disparity(depth: DepthMap) -> DisparityMap:
    """Inverse depth; invalid pixels become zero disparity."""
    v = depth.values
    return DisparityMap(np.where(depth.valid, 1.0 / np.where(depth.valid, v, 1.0), 0.0))


def align_pair(
    gt: DepthMap,
    pred: DepthMap,
    median_scale: bool = False,
    min_depth: float = 1e-3,
    max_depth: float = 80.0,
) -> ValidPairView:
    """Select pixels valid in both maps with gt strictly inside the depth range.

    With ``median_scale`` the prediction is multiplied by
    median(gt)/median(pred) over the kept pixels. The prediction is always
    clamped into [min_depth, max_depth] afterwards.
    """
    _check_range(min_depth, max_depth)
    if gt.shape != pred.shape:
        raise DimensionMismatchError(f"gt {gt.shape} vs pred {pred.shape}")
    keep = gt.valid & pred.valid & (gt.values > min_depth) & (gt.values < max_depth)
    if not keep.any():
        raise EmptyOverlapError("no co-valid pixels within the depth range")
    g = gt.values[keep]
    p = pred.values[keep]
    if median_scale:
        med_p = np.median(p)
        if med_p == 0:
            raise DegeneratePredictionError("median of prediction is zero")
        p = p * (np.median(g) / med_p)
    return ValidPairView(g, np.clip(p, min_depth, max_depth))


def make_rng(seed: int | None) -> np.random.Generator:
    """PCG64 stream; the same seed gives the same sequence on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


def sub_seed(master_seed: int, key: str | int) -> int:
    """Stable 63-bit seed derived from a master seed and a per-item key."""
    digest = hashlib.sha256(f"{int(master_seed)}\x1f{key}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def check_same_shape(*arrays_or_maps) -> None:
    shapes = {tuple(getattr(a, "shape", np.shape(a)))[:2] for a in arrays_or_maps}
    if len(shapes) > 1:
        raise DimensionMismatchError(f"inputs have different shapes: {sorted(shapes)}")
