"""Fourier-domain augmentations: amplitude-phase recombination, FDA and MRSF.

Transforms are unnormalized forward / 1/(HW)-normalized inverse, applied
per channel. Spectrum edits are always closed under conjugate mirroring so the
inverse transform of a real image stays real.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment_spatial import SdaConfig, sda_mask
from .core import InvalidInputError, RgbImage, check_same_shape, make_rng
from .geometry import rotate


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    centered: bool = False

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def to_centered(self) -> "Spectrum":
        if self.centered:
            return self
        return Spectrum(np.fft.fftshift(self.values, axes=(0, 1)), True)

    def to_uncentered(self) -> "Spectrum":
        if not self.centered:
            return self
        return Spectrum(np.fft.ifftshift(self.values, axes=(0, 1)), False)

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


def fft2(plane, centered: bool = False) -> Spectrum:
    """Unnormalized 2-D DFT of an H x W plane (or H x W x C, per channel)."""
    plane = np.asarray(plane)
    if plane.ndim not in (2, 3) or min(plane.shape[:2]) < 1:
        raise InvalidInputError("expected an H x W or H x W x C array")
    spec = Spectrum(np.fft.fft2(plane, axes=(0, 1)))
    return spec.to_centered() if centered else spec


def ifft2(spectrum: Spectrum) -> np.ndarray:
    """Inverse DFT with 1/(HW) normalization; returns a complex array."""
    return np.fft.ifft2(spectrum.to_uncentered().values, axes=(0, 1))


def conjugate_indices(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Uncentered index of the conjugate partner of every bin."""
    r = (-np.arange(height)) % height
    c = (-np.arange(width)) % width
    return np.meshgrid(r, c, indexing="ij")


def amplitude_phase_mix(amplitude_src, phase_src) -> np.ndarray:
    """Real image whose spectrum has the first input's amplitude and the second's phase."""
    a = np.asarray(amplitude_src, dtype=np.float64)
    p = np.asarray(phase_src, dtype=np.float64)
    if a.shape != p.shape:
        raise InvalidInputError(f"shape mismatch {a.shape} vs {p.shape}")
    fa = np.fft.fft2(a, axes=(0, 1))
    fp = np.fft.fft2(p, axes=(0, 1))
    mixed = np.abs(fa) * np.exp(1j * np.angle(fp))
    return np.fft.ifft2(mixed, axes=(0, 1)).real


def apr_recombine(amplitude_src: RgbImage, phase_src: RgbImage) -> RgbImage:
    """Amplitude of one image with the phase of another, clamped to [0, 1]."""
    check_same_shape(amplitude_src, phase_src)
    return RgbImage.clipped(amplitude_phase_mix(amplitude_src.data, phase_src.data))


@dataclass(frozen=True)
class FdaConfig:
    theta: float = 24.0
    low_freq_size: int = 50
    highfreq_mask_ratio: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.theta < 360.0:
            raise InvalidInputError("theta must lie in [0, 360)")
        if self.low_freq_size < 1:
            raise InvalidInputError("low_freq_size must be at least 1")
        if not 0.0 <= self.highfreq_mask_ratio <= 1.0:
            raise InvalidInputError("highfreq_mask_ratio must lie in [0, 1]")


def low_frequency_mask(height: int, width: int, size: int) -> np.ndarray:
    """Uncentered mask of the S x S square around DC, closed under conjugation.

    For even S the centred square is one bin longer on the negative side, so
    its conjugate mirror adds the matching positive row and column.
    """
    if not 1 <= size <= min(height, width):
        raise InvalidInputError(f"low_freq_size {size} exceeds the image side")
    centered = np.zeros((height, width), dtype=bool)
    r0 = height // 2 - size // 2
    c0 = width // 2 - size // 2
    centered[r0 : r0 + size, c0 : c0 + size] = True
    mask = np.fft.ifftshift(centered)
    cr, cc = conjugate_indices(height, width)
    return mask | mask[cr, cc]


def high_frequency_drop_mask(
    low_mask: np.ndarray, ratio: float, rng: np.random.Generator
) -> np.ndarray:
    """Zero-mask over a random ``ratio`` of high-frequency conjugate pairs."""
    h, w = low_mask.shape
    cr, cc = conjugate_indices(h, w)
    lin = np.arange(h * w).reshape(h, w)
    partner = cr * w + cc
    # one representative per conjugate pair (self-conjugate bins represent themselves)
    reps = np.flatnonzero((~low_mask & (lin <= partner)).ravel())
    n_drop = int(round(ratio * reps.size))
    drop = np.zeros(h * w, dtype=bool)
    if n_drop:
        chosen = rng.choice(reps, size=n_drop, replace=False)
        drop[chosen] = True
        drop[partner.ravel()[chosen]] = True
    return drop.reshape(h, w)


def fda_augment(
    image: RgbImage, cfg: FdaConfig | None = None, rng: np.random.Generator | None = None
) -> RgbImage:
    """Low frequencies of the image spliced with high frequencies of its rotation.

    The image is rotated by ``theta`` (bilinear, reflected borders). Complex
    bins inside the S x S centre square come from the original spectrum, the
    rest from the rotated one; a random fraction of the high-frequency bins is
    then zeroed. The rng is used only for that drop mask.
    """
    cfg = cfg or FdaConfig()
    rng = rng if rng is not None else np.random.default_rng()
    h, w = image.shape
    low = low_frequency_mask(h, w, cfg.low_freq_size)
    rotated = rotate(image, cfg.theta, mode="reflect")
    f_orig = np.fft.fft2(image.data, axes=(0, 1))
    f_rot = np.fft.fft2(rotated.data, axes=(0, 1))
    spliced = np.where(low[..., None], f_orig, f_rot)
    if cfg.highfreq_mask_ratio > 0:
        drop = high_frequency_drop_mask(low, cfg.highfreq_mask_ratio, rng)
        spliced = np.where(drop[..., None], 0.0, spliced)
    return RgbImage.clipped(np.fft.ifft2(spliced, axes=(0, 1)).real)


@dataclass(frozen=True)
class MrsfConfig:
    rho1: float = 0.5
    rho2: float = 0.5
    fda: FdaConfig = field(default_factory=FdaConfig)
    sda: SdaConfig = field(default_factory=SdaConfig)

    def __post_init__(self):
        if not (0.0 <= self.rho1 <= 1.0 and 0.0 <= self.rho2 <= 1.0):
            raise InvalidInputError("rho1 and rho2 must lie in [0, 1]")


@dataclass(frozen=True)
class MrsfTrace:
    image: RgbImage
    applied_fda: bool
    applied_sda: bool
    fda_seed: int
    sda_seed: int


def mrsf_detailed(image: RgbImage, cfg: MrsfConfig, rng: np.random.Generator) -> MrsfTrace:
    """FDA with probability rho1, then SDA with probability rho2.

    Draw order from ``rng``: two uniforms (FDA, SDA decisions), then one
    63-bit sub-seed for each stage. Every draw happens regardless of the
    decisions so the stream length is fixed.
    """
    u1, u2 = rng.random(2)
    fda_seed, sda_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))
    apply_fda = bool(u1 < cfg.rho1)
    apply_sda = bool(u2 < cfg.rho2)
    out = image
    if apply_fda:
        out = fda_augment(out, cfg.fda, make_rng(fda_seed))
    if apply_sda:
        out = sda_mask(out, cfg.sda, make_rng(sda_seed))[0]
    return MrsfTrace(out, apply_fda, apply_sda, fda_seed, sda_seed)


def mrsf(
    image: RgbImage, cfg: MrsfConfig | None = None, rng: np.random.Generator | None = None
) -> RgbImage:
    rng = rng if rng is not None else np.random.default_rng()
    return mrsf_detailed(image, cfg or MrsfConfig(), rng).image
