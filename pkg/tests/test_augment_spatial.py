import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdk.core import DegenerateInputError, InvalidInputError, RgbImage, make_rng
from rdk.augment_spatial import (
    BatchSource,
    ChainConfig,
    adversarial_batch_schedule,
    augmix,
    augmix_detailed,
    cutflip,
    gaussian_noise_corruption,
    image_mix,
    is_excluded_op,
    l2_perturb,
    mae_mix,
    patch_mask,
    sda_mask,
    sda_union_mask,
    SdaConfig,
    swap_rows,
)


@pytest.fixture
def img(rng):
    return RgbImage(rng.random((24, 32, 3)))


def test_augmix_m_zero_is_identity(img):
    out = augmix(img, ChainConfig(), make_rng(0), m=0.0)
    np.testing.assert_array_equal(out.data, img.data)


def test_augmix_identity_chains(img):
    cfg = ChainConfig(op_set=("identity",))
    out = augmix(img, cfg, make_rng(1))
    np.testing.assert_allclose(out.data, img.data, atol=1e-12)


def test_augmix_deterministic_and_convex(img):
    a = augmix_detailed(img, ChainConfig(), make_rng(9))
    b = augmix_detailed(img, ChainConfig(), make_rng(9))
    np.testing.assert_array_equal(a.image.data, b.image.data)
    assert abs(a.weights.sum() - 1.0) < 1e-12
    assert 0.0 <= a.m <= 1.0
    assert len(a.chains) == 3 and all(1 <= len(c) <= 3 for c in a.chains)


@pytest.mark.parametrize("name", ["contrast", "color", "brightness", "sharpness", "cutout", "gaussian_noise", "motion_blur"])
def test_excluded_ops_rejected(name):
    assert is_excluded_op(name)
    with pytest.raises(InvalidInputError):
        ChainConfig(op_set=("rotate", name))


def test_swap_rows_hand_order():
    a = np.arange(4)[:, None]
    assert swap_rows(a, 1).ravel().tolist() == [1, 2, 3, 0]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.data())
def test_swap_rows_complement_is_identity(h, data):
    s = data.draw(st.integers(1, h - 1))
    a = np.arange(h * 2).reshape(h, 2)
    np.testing.assert_array_equal(swap_rows(swap_rows(a, s), h - s), a)


def test_cutflip_probability_zero(img):
    assert cutflip(img, rng=make_rng(0), probability=0.0) is img


def test_cutflip_fixed_split(img):
    out = cutflip(img, split_row=5, rng=make_rng(0), probability=1.0)
    np.testing.assert_array_equal(out.data, swap_rows(img.data, 5))


def test_image_mix_endpoints(rng):
    a, b = RgbImage(rng.random((3, 3, 3))), RgbImage(rng.random((3, 3, 3)))
    np.testing.assert_array_equal(image_mix(a, b, 0.0).data, a.data)
    np.testing.assert_array_equal(image_mix(a, b, 1.0).data, b.data)
    zero, one = RgbImage(np.zeros((2, 2, 3))), RgbImage(np.ones((2, 2, 3)))
    np.testing.assert_array_equal(image_mix(zero, one, 0.5).data, 0.5)
    np.testing.assert_allclose(image_mix(a, b, 0.3).data, 0.7 * a.data + 0.3 * b.data, rtol=1e-15)


def test_patch_mask_counts():
    m = patch_mask(64, 64, 16, 0.5, make_rng(0))
    patches = m.reshape(4, 16, 4, 16).any(axis=(1, 3))
    assert patches.sum() == 8
    assert m.sum() == 8 * 256


def test_mae_mix_endpoints(img):
    np.testing.assert_array_equal(mae_mix(img, alpha=0.0, rng=make_rng(0)).data, img.data)
    ident = lambda masked, mask: masked  # noqa: E731
    out = mae_mix(img, ident, mask_ratio=0.0, alpha=1.0, rng=make_rng(0))
    np.testing.assert_array_equal(out.data, img.data)


def test_mae_mix_default_reconstructor_in_range(img):
    out = mae_mix(img, rng=make_rng(3))
    assert out.data.shape == img.data.shape
    assert 0.0 <= out.data.min() and out.data.max() <= 1.0


def test_sda_zero_masks(img):
    out, mask = sda_mask(img, SdaConfig(0, 120), make_rng(0))
    assert not mask.any()
    np.testing.assert_array_equal(out.data, img.data)


def test_sda_corner_clipping():
    mask = sda_union_mask(480, 640, [(639, 479)], 120)
    assert mask.sum() == 1 and mask[479, 639]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 6), st.integers(1, 10))
def test_sda_cardinality_bound(seed, n, a):
    img = RgbImage(np.full((12, 15, 3), 0.5))
    out, mask = sda_mask(img, SdaConfig(n, a), make_rng(seed))
    assert mask.sum() <= n * a * a
    assert np.all(out.data[mask] == 0) and np.all(out.data[~mask] == 0.5)


def test_l2_perturb_norm():
    x = RgbImage(np.full((4, 4, 3), 0.5))
    delta = np.random.default_rng(0).standard_normal((4, 4, 3))
    out = l2_perturb(x, delta, 0.1)
    assert np.linalg.norm(out.data - x.data) == pytest.approx(0.1, rel=1e-12)


def test_l2_perturb_saturates_and_rejects_zero():
    x = RgbImage(np.ones((2, 2, 3)))
    np.testing.assert_array_equal(l2_perturb(x, np.ones((2, 2, 3)), 1e6).data, 1.0)
    with pytest.raises(DegenerateInputError):
        l2_perturb(x, np.zeros((2, 2, 3)), 1.0)


@pytest.mark.parametrize(
    "b, expected", [(10, (5, 3, 2)), (1, (1, 0, 0)), (3, (2, 1, 0)), (7, (4, 2, 1))]
)
def test_batch_schedule_counts(b, expected):
    labels = adversarial_batch_schedule(b, make_rng(0))
    counts = tuple(labels.count(s) for s in (BatchSource.CLEAN, BatchSource.CURRENT, BatchSource.REPLAY))
    assert counts == expected


def test_batch_schedule_deterministic():
    assert adversarial_batch_schedule(16, make_rng(4)) == adversarial_batch_schedule(16, make_rng(4))


def test_noise_corruption_in_range(img):
    out = gaussian_noise_corruption(img, 0.5, make_rng(0))
    assert 0.0 <= out.data.min() and out.data.max() <= 1.0
