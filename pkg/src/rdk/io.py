"""Image and depth file formats.

* 16-bit single-channel PNG for depth (value = raw / divisor, raw 0 = invalid)
* 8-bit RGB PNG for images
* ``RDK1``: little-endian float32 H x W map (magic, u32 width, u32 height, payload)
* ``RDKF``: little-endian float32 C x H x W tensor (magic, u32 C, u32 H, u32 W, payload)
"""

from __future__ import annotations

import os
import struct

import numpy as np
from PIL import Image

from .core import DepthMap, FormatError, InvalidInputError, RgbImage

KITTI_DIVISOR = 256.0
NYU_DIVISOR = 1000.0

_MAP_MAGIC = b"RDK1"
_TENSOR_MAP_MAGIC = b"RDKF"


def _open_png(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: not a readable image ({exc})") from exc
    if img.format != "PNG":
        raise FormatError(f"{path}: expected PNG, got {img.format}")
    return img


def read_depth_png_raw(path) -> np.ndarray:
    """Raw uint16 samples of a 16-bit single-channel PNG."""
    img = _open_png(path)
    # Pillow reports 16-bit greyscale as I;16 (recent) or I (older releases).
    if img.mode.startswith("I;16"):
        return np.array(img, dtype=np.uint16)
    if img.mode == "I":
        arr = np.array(img)
        if arr.min() < 0 or arr.max() > 65535:
            raise FormatError(f"{path}: samples exceed the 16-bit range")
        return arr.astype(np.uint16)
    raise FormatError(f"{path}: expected 16-bit single-channel PNG, got mode {img.mode}")


def write_depth_png_raw(raw: np.ndarray, path) -> None:
    raw = np.ascontiguousarray(raw, dtype=np.uint16)
    if raw.ndim != 2:
        raise InvalidInputError("raw depth must be a 2-D array")
    # Fixed encoder settings keep the output byte-stable.
    Image.fromarray(raw).save(path, format="PNG", compress_level=6, optimize=False)


def read_depth_png(path, divisor: float = KITTI_DIVISOR) -> DepthMap:
    if not divisor > 0:
        raise InvalidInputError("divisor must be positive")
    raw = read_depth_png_raw(path)
    valid = raw > 0
    return DepthMap(raw.astype(np.float64) / divisor, valid)


def depth_to_raw(depth: DepthMap, divisor: float = KITTI_DIVISOR) -> np.ndarray:
    """Quantize to uint16 by round-to-nearest.

    Valid pixels are kept in [1, 65535] so quantization never turns a valid
    sample into the invalid sentinel.
    """
    if not divisor > 0:
        raise InvalidInputError("divisor must be positive")
    scaled = np.rint(np.where(depth.valid, depth.values, 0.0) * divisor)
    raw = np.where(depth.valid, np.clip(scaled, 1, 65535), 0)
    return raw.astype(np.uint16)


def write_depth_png(depth: DepthMap, path, divisor: float = KITTI_DIVISOR) -> None:
    write_depth_png_raw(depth_to_raw(depth, divisor), path)


def read_rgb_png(path) -> RgbImage:
    img = _open_png(path)
    if img.mode != "RGB":
        raise FormatError(f"{path}: expected 8-bit RGB PNG, got mode {img.mode}")
    return RgbImage(np.asarray(img, dtype=np.float64) / 255.0)


def rgb_to_uint8(image: RgbImage) -> np.ndarray:
    return np.rint(image.data * 255.0).astype(np.uint8)


def write_rgb_png(image: RgbImage, path) -> None:
    Image.fromarray(rgb_to_uint8(image), mode="RGB").save(
        path, format="PNG", compress_level=6, optimize=False
    )


def write_raw_map(array, path) -> None:
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim != 2:
        raise InvalidInputError("raw map must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_MAP_MAGIC + struct.pack("<II", w, h))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_raw_map(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) != 12 or head[:4] != _MAP_MAGIC:
            raise FormatError(f"{path}: missing RDK1 header")
        w, h = struct.unpack("<II", head[4:])
        payload = fh.read()
    if len(payload) != 4 * w * h:
        raise FormatError(f"{path}: payload holds {len(payload)} bytes, expected {4 * w * h}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float64)


def write_raw_tensor(array, path) -> None:
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim != 3:
        raise InvalidInputError("raw tensor must be C x H x W")
    c, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(_TENSOR_MAP_MAGIC + struct.pack("<III", c, h, w))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_raw_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:4] != _TENSOR_MAP_MAGIC:
            raise FormatError(f"{path}: missing RDKF header")
        c, h, w = struct.unpack("<III", head[4:])
        payload = fh.read()
    if len(payload) != 4 * c * h * w:
        raise FormatError(f"{path}: truncated RDKF payload")
    return np.frombuffer(payload, dtype="<f4").reshape(c, h, w).astype(np.float64)


DEPTH_EXTENSIONS = (".png", ".rdk", ".npy")


def read_map_file(path, divisor: float = KITTI_DIVISOR) -> np.ndarray:
    """Load any supported single-channel map as float64; PNG zeros become 0."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        return read_depth_png_raw(path).astype(np.float64) / divisor
    if ext == ".rdk":
        return read_raw_map(path)
    if ext == ".npy":
        arr = np.load(path, allow_pickle=False)
        if arr.ndim != 2:
            raise FormatError(f"{path}: expected a 2-D array")
        return arr.astype(np.float64)
    raise FormatError(f"{path}: unsupported map extension {ext!r}")


def write_map_file(depth: DepthMap, path, divisor: float = KITTI_DIVISOR) -> None:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".png":
        write_depth_png(depth, path, divisor)
    elif ext == ".rdk":
        write_raw_map(np.where(depth.valid, depth.values, 0.0), path)
    elif ext == ".npy":
        np.save(path, np.where(depth.valid, depth.values, 0.0))
    else:
        raise FormatError(f"{path}: unsupported map extension {ext!r}")
