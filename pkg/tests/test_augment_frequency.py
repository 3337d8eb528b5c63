import numpy as np
import pytest

from oracles import dft2, idft2
from rdk.core import RgbImage, make_rng
from rdk.geometry import rotate
from rdk.augment_frequency import (
    FdaConfig,
    MrsfConfig,
    amplitude_phase_mix,
    apr_recombine,
    conjugate_indices,
    fda_augment,
    fft2,
    high_frequency_drop_mask,
    ifft2,
    low_frequency_mask,
    mrsf,
    mrsf_detailed,
)


def test_fft_matches_dft_matrix(rng):
    x = rng.random((12, 10))
    np.testing.assert_allclose(fft2(x).values, dft2(x), atol=1e-9)


def test_constant_image_is_dc_only():
    spec = fft2(np.full((6, 8), 0.25)).values
    assert spec[0, 0] == pytest.approx(0.25 * 48)
    spec[0, 0] = 0
    assert np.abs(spec).max() < 1e-12


def test_real_spectrum_is_conjugate_symmetric(rng):
    f = fft2(rng.random((9, 12))).values
    cr, cc = conjugate_indices(9, 12)
    np.testing.assert_allclose(f, np.conj(f[cr, cc]), atol=1e-9)


def test_centering_round_trip(rng):
    x = rng.random((7, 6))
    spec = fft2(x, centered=True)
    assert spec.centered
    assert spec.values[3, 3] == pytest.approx(x.sum())
    np.testing.assert_allclose(ifft2(spec).real, x, atol=1e-12)


def test_apr_constant_amplitude():
    # a constant amplitude source keeps only the DC bin, whose phase is 0 for a positive image
    x = RgbImage(np.random.default_rng(2).uniform(0.1, 1.0, (8, 8, 3)))
    out = apr_recombine(RgbImage(np.full((8, 8, 3), 0.4)), x)
    np.testing.assert_allclose(out.data, 0.4, atol=1e-12)


def test_apr_keeps_amplitude_spectrum(rng):
    a, p = rng.random((8, 10, 3)), rng.random((8, 10, 3))
    out = amplitude_phase_mix(a, p)
    for c in range(3):
        np.testing.assert_allclose(np.abs(dft2(out[..., c])), np.abs(dft2(a[..., c])), atol=1e-9)


def test_apr_is_asymmetric(rng):
    a, b = RgbImage(rng.random((8, 8, 3))), RgbImage(rng.random((8, 8, 3)))
    assert not np.allclose(apr_recombine(a, b).data, apr_recombine(b, a).data)


@pytest.mark.parametrize("h, w, s", [(8, 8, 4), (9, 7, 3), (10, 12, 5), (16, 16, 16)])
def test_low_mask_is_conjugate_closed(h, w, s):
    m = low_frequency_mask(h, w, s)
    cr, cc = conjugate_indices(h, w)
    np.testing.assert_array_equal(m, m[cr, cc])
    assert m[0, 0]
    assert m.sum() >= s * s


def test_odd_low_mask_is_exact_square():
    m = np.fft.fftshift(low_frequency_mask(9, 9, 3))
    assert m.sum() == 9 and m[3:6, 3:6].all()


def test_drop_mask_pairs_and_fraction():
    low = low_frequency_mask(16, 16, 4)
    drop = high_frequency_drop_mask(low, 0.25, make_rng(0))
    cr, cc = conjugate_indices(16, 16)
    np.testing.assert_array_equal(drop, drop[cr, cc])
    assert not (drop & low).any()
    lin = np.arange(256).reshape(16, 16)
    self_conj = lin == cr * 16 + cc
    # (0, 8), (8, 0) and (8, 8) are their own partners and lie outside the low square
    assert (self_conj & ~low).sum() == 3
    n_reps = ((~low).sum() + 3) // 2
    n_drop = round(0.25 * n_reps)
    assert drop.sum() in (2 * n_drop - 3, 2 * n_drop - 2, 2 * n_drop - 1, 2 * n_drop)


def test_fda_identity_configuration(rng):
    img = RgbImage(rng.random((32, 32, 3)))
    for s in (32, 7):
        out = fda_augment(img, FdaConfig(theta=0.0, low_freq_size=s, highfreq_mask_ratio=0.0), make_rng(0))
        assert np.max(np.abs(out.data - img.data)) < 1e-6


def test_fda_matches_splice_oracle():
    rng = np.random.default_rng(11)
    img = RgbImage(rng.random((128, 128, 3)))
    out = fda_augment(img, FdaConfig(theta=24.0, low_freq_size=50, highfreq_mask_ratio=0.0), make_rng(0))
    rot = rotate(img, 24.0, mode="reflect")
    # centered square of side 50 around DC, in signed frequency terms, closed under negation
    k = np.fft.fftfreq(128, 1 / 128).astype(int)
    inside = (k >= -25) & (k <= 24)
    sq = inside[:, None] & inside[None, :]
    low = sq | sq[np.ix_(-np.arange(128) % 128, -np.arange(128) % 128)]
    expected = np.empty_like(img.data)
    for c in range(3):
        spliced = np.where(low, dft2(img.data[..., c]), dft2(rot.data[..., c]))
        back = idft2(spliced)
        assert np.abs(back.imag).max() < 1e-9
        expected[..., c] = np.clip(back.real, 0, 1)
    assert np.max(np.abs(out.data - expected)) < 1e-6


def test_fda_deterministic(rng):
    img = RgbImage(rng.random((32, 32, 3)))
    cfg = FdaConfig(low_freq_size=8)
    a = fda_augment(img, cfg, make_rng(5))
    b = fda_augment(img, cfg, make_rng(5))
    np.testing.assert_array_equal(a.data, b.data)


def test_mrsf_endpoints(rng):
    img = RgbImage(rng.random((32, 32, 3)))
    fda = FdaConfig(low_freq_size=8)
    assert mrsf(img, MrsfConfig(0.0, 0.0, fda=fda), make_rng(1)) is img
    trace = mrsf_detailed(img, MrsfConfig(1.0, 0.0, fda=fda), make_rng(1))
    alone = fda_augment(img, fda, make_rng(trace.fda_seed))
    np.testing.assert_array_equal(trace.image.data, alone.data)
    assert trace.applied_fda and not trace.applied_sda
