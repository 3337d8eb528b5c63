"""Pinhole reprojection and bilinear view synthesis.

Integer coordinates address pixel centres. Warping is backward: every target
pixel is back-projected with its depth, moved by the pose and projected into
the source camera, and the source image is sampled there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import DepthMap, InvalidInputError, RgbImage


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    @classmethod
    def from_dict(cls, d: dict) -> "Intrinsics":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))

    @classmethod
    def from_json(cls, path) -> "Intrinsics":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class RigidPose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-9, rtol=0):
            raise InvalidInputError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidInputError("rotation must have determinant +1")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    def inverse(self) -> "RigidPose":
        return RigidPose(self.rotation.T, -self.rotation.T @ self.translation)

    @classmethod
    def from_dict(cls, d: dict) -> "RigidPose":
        return cls(np.asarray(d["R"], dtype=float), np.asarray(d["t"], dtype=float))

    @classmethod
    def from_json(cls, path) -> "RigidPose":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"R": self.rotation.ravel().tolist(), "t": self.translation.tolist()}


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Continuous source coordinates per target pixel plus an in-bounds flag."""

    u: np.ndarray
    v: np.ndarray
    in_bounds: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return u, v


BORDER_SNAP = 1e-9


def _snap(c: np.ndarray, n: int) -> np.ndarray:
    # backproject/project round trips can land an ulp outside the image
    edge = np.clip(c, 0, n - 1)
    return np.where(np.abs(c - edge) <= BORDER_SNAP, edge, c)


def grid_from_coords(u, v, src_height: int, src_width: int, extra_valid=None) -> SampleGrid:
    u = _snap(np.asarray(u, dtype=np.float64), src_width)
    v = _snap(np.asarray(v, dtype=np.float64), src_height)
    ok = np.isfinite(u) & np.isfinite(v)
    ok &= (u >= 0) & (u <= src_width - 1) & (v >= 0) & (v <= src_height - 1)
    if extra_valid is not None:
        ok &= extra_valid
    return SampleGrid(u, v, ok)


def reproject(
    depth: DepthMap, pose: RigidPose, k: Intrinsics, src_shape: tuple[int, int] | None = None
) -> SampleGrid:
    """Source-image coordinates of every target pixel.

    Pixels with invalid depth or a non-positive transformed depth are flagged
    out of bounds.
    """
    h, w = depth.shape
    sh, sw = src_shape or (h, w)
    u, v = pixel_grid(h, w)
    z = depth.values
    x = (u - k.cx) / k.fx * z
    y = (v - k.cy) / k.fy * z
    pts = np.stack([x, y, z], axis=-1) @ pose.rotation.T + pose.translation
    zt = pts[..., 2]
    front = depth.valid & (zt > 0)
    safe_z = np.where(front, zt, 1.0)
    pu = k.fx * pts[..., 0] / safe_z + k.cx
    pv = k.fy * pts[..., 1] / safe_z + k.cy
    return grid_from_coords(pu, pv, sh, sw, extra_valid=front)


def _reflect_coords(c: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(c)
    period = 2.0 * (n - 1)
    c = np.mod(c, period)
    return np.where(c > n - 1, period - c, c)


def bilinear_sample(src: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear lookup of an H x W (x C) array at in-range coordinates."""
    h, w = src.shape[:2]
    x0 = np.clip(np.floor(u), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(v), 0, max(h - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = u - x0
    wy = v - y0
    if src.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    top = (1 - wx) * src[y0, x0] + wx * src[y0, x1]
    bottom = (1 - wx) * src[y1, x0] + wx * src[y1, x1]
    return (1 - wy) * top + wy * bottom


def sample_bilinear(
    src: RgbImage, grid: SampleGrid, mode: str = "zeros"
) -> tuple[RgbImage, np.ndarray]:
    """Sample ``src`` at ``grid``.

    ``mode="zeros"`` fills out-of-bounds pixels with 0 and reports them in the
    returned coverage mask; ``mode="reflect"`` mirrors coordinates back into
    the image so coverage is total (pixels behind the camera stay uncovered).
    """
    h, w = src.shape
    if mode == "reflect":
        finite = np.isfinite(grid.u) & np.isfinite(grid.v)
        u = _reflect_coords(np.where(finite, grid.u, 0.0), w)
        v = _reflect_coords(np.where(finite, grid.v, 0.0), h)
        covered = finite
    elif mode == "zeros":
        covered = grid.in_bounds
        u = np.where(covered, grid.u, 0.0)
        v = np.where(covered, grid.v, 0.0)
    else:
        raise InvalidInputError(f"unknown sampling mode {mode!r}")
    out = bilinear_sample(src.data, u, v)
    out = np.where(covered[..., None], out, 0.0)
    return RgbImage.clipped(out), covered


def synthesize_view(
    src: RgbImage, depth: DepthMap, pose: RigidPose, k: Intrinsics
) -> tuple[RgbImage, np.ndarray]:
    """Reconstruct the target view by sampling ``src`` through depth and pose."""
    grid = reproject(depth, pose, k, src_shape=src.shape)
    return sample_bilinear(src, grid)


def affine_grid(height: int, width: int, inverse_matrix, src_shape=None) -> SampleGrid:
    """Grid for an affine warp given the output-to-source 2x3 (or 3x3) matrix."""
    m = np.asarray(inverse_matrix, dtype=np.float64)
    u, v = pixel_grid(height, width)
    su = m[0, 0] * u + m[0, 1] * v + m[0, 2]
    sv = m[1, 0] * u + m[1, 1] * v + m[1, 2]
    sh, sw = src_shape or (height, width)
    return grid_from_coords(su, sv, sh, sw)


def rotation_about_center(height: int, width: int, degrees: float) -> np.ndarray:
    """Output-to-source affine map rotating the image by ``degrees`` about its centre."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    t = np.deg2rad(degrees)
    c, s = np.cos(t), np.sin(t)
    return np.array(
        [[c, -s, cx - c * cx + s * cy], [s, c, cy - s * cx - c * cy]], dtype=np.float64
    )


def rotate(image: RgbImage, degrees: float, mode: str = "reflect") -> RgbImage:
    if degrees % 360 == 0:
        return image
    grid = affine_grid(*image.shape, rotation_about_center(*image.shape, degrees))
    return sample_bilinear(image, grid, mode=mode)[0]


def resize_bilinear(array, height: int, width: int) -> np.ndarray:
    """Resize an H x W (x C) array with align-corners bilinear interpolation."""
    array = np.asarray(array, dtype=np.float64)
    h, w = array.shape[:2]
    ys = np.linspace(0, h - 1, height) if height > 1 else np.zeros(1)
    xs = np.linspace(0, w - 1, width) if width > 1 else np.zeros(1)
    v, u = np.meshgrid(ys, xs, indexing="ij")
    return bilinear_sample(array, u, v)
