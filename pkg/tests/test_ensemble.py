import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rdk.core import DepthMap, DisparityMap, EmptyOverlapError, InvalidInputError, UnknownLabelError
from rdk.ensemble import (
    GatedParams,
    RoutingTable,
    flip_merge,
    gated_fuse,
    median_fuse,
    read_label_csv,
    routed_fuse,
    weighted_fuse,
)

depths = st.floats(0.05, 80.0, allow_nan=False)


def _d(*vals):
    return DepthMap(np.array([vals], dtype=float))


def test_gated_hand_values():
    assert gated_fuse(_d(1.0), _d(2.0)).values[0, 0] == 2.0
    blend = 1 / (2 / 3 * 0.5 + 1 / 3 / 2.2)
    assert gated_fuse(_d(2.0), _d(2.2)).values[0, 0] == pytest.approx(blend, rel=1e-12)
    assert blend == pytest.approx(2.0625, abs=1e-12)


def test_gate_at_threshold_takes_second():
    # D2/D1 - 1 = 0.5 exactly
    assert gated_fuse(_d(2.0), _d(3.0), GatedParams(0.5, 0.5, 0.5)).values[0, 0] == 3.0


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 10, elements=depths))
def test_gated_identity_exact(v):
    d = DepthMap(v.reshape(2, 5))
    np.testing.assert_array_equal(gated_fuse(d, d).values, d.values)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 10, elements=depths), arrays(np.float64, 10, elements=depths))
def test_gated_bounded(a, b):
    out = gated_fuse(DepthMap(a.reshape(2, 5)), DepthMap(b.reshape(2, 5))).values.ravel()
    assert np.all(out >= np.minimum(a, b)) and np.all(out <= np.maximum(a, b))


def test_gated_per_image():
    d1 = DepthMap(np.array([[1.0, 2.0]]))
    d2 = DepthMap(np.array([[1.1, 2.2]]))
    per_image = gated_fuse(d1, d2, per_image=True).values
    np.testing.assert_allclose(per_image, gated_fuse(d1, d2).values)
    far = DepthMap(np.array([[1.0, 20.0]]))
    np.testing.assert_array_equal(gated_fuse(d1, far, per_image=True).values, far.values)


def test_gated_params_validation():
    with pytest.raises(InvalidInputError):
        GatedParams(0.5, 0.6, 0.45)


def test_median_fuse_examples():
    np.testing.assert_array_equal(median_fuse([_d(1, 2, 3)]).values, [[0.5, 1.0, 1.5]])
    d = _d(1, 4, 9, 2)
    np.testing.assert_array_equal(median_fuse([d, d]).values, median_fuse([d]).values)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 9, elements=depths), st.integers(-6, 6))
def test_median_fuse_power_of_two_scaling_bit_exact(v, e):
    d = DepthMap(v.reshape(3, 3))
    other = DepthMap(v[::-1].reshape(3, 3))
    scaled = DepthMap(v.reshape(3, 3) * 2.0**e)
    np.testing.assert_array_equal(median_fuse([scaled, other]).values, median_fuse([d, other]).values)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 9, elements=depths), st.floats(0.01, 100.0))
def test_median_fuse_arbitrary_scaling_within_ulps(v, c):
    d = DepthMap(v.reshape(3, 3))
    scaled = DepthMap(v.reshape(3, 3) * c)
    np.testing.assert_allclose(median_fuse([scaled]).values, median_fuse([d]).values, rtol=4e-16 * 4)


def test_median_fuse_masks_intersect():
    a = DepthMap.from_array([[0.0, 1.0, 2.0]])
    b = DepthMap.from_array([[1.0, 0.0, 2.0]])
    out = median_fuse([a, b])
    assert out.valid.tolist() == [[False, False, True]]
    with pytest.raises(EmptyOverlapError):
        median_fuse([DepthMap.from_array([[0.0, 1.0]]), DepthMap.from_array([[1.0, 0.0]])])


def test_weighted_fuse_hand_oracle():
    out = weighted_fuse([_d(1.0, 1.0), _d(2.0, 2.0)], [0.6, 0.4])
    np.testing.assert_allclose(out.values, 1.4, rtol=1e-15)
    np.testing.assert_array_equal(weighted_fuse([_d(3.0), _d(7.0)], [1.0, 0.0]).values, [[3.0]])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 4, elements=depths), arrays(np.float64, 4, elements=depths), st.floats(0, 1))
def test_weighted_fuse_permutation_and_idempotence(a, b, w):
    da, db = DepthMap(a.reshape(2, 2)), DepthMap(b.reshape(2, 2))
    x = weighted_fuse([da, db], [w, 1 - w]).values
    y = weighted_fuse([db, da], [1 - w, w]).values
    np.testing.assert_array_equal(x, y)
    np.testing.assert_allclose(weighted_fuse([da, da], [w, 1 - w]).values, a.reshape(2, 2), rtol=1e-15)


def test_weighted_fuse_rejects_bad_weights():
    with pytest.raises(InvalidInputError):
        weighted_fuse([_d(1.0), _d(2.0)], [0.7, 0.4])


def test_routed_fuse():
    table = RoutingTable({"noise": [0.2, 0.8], "weather": [0.6, 0.4]})
    maps = [_d(1.0), _d(2.0)]
    np.testing.assert_array_equal(
        routed_fuse(maps, "noise", table).values, weighted_fuse(maps, [0.2, 0.8]).values
    )
    with pytest.raises(UnknownLabelError):
        routed_fuse(maps, "blur", table)


def test_read_label_csv(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("filename,class\na,noise\nb,weather\n")
    assert read_label_csv(path) == {"a": "noise", "b": "weather"}


def test_flip_merge(rng):
    np.testing.assert_array_equal(
        flip_merge(DisparityMap(np.ones((2, 3))), DisparityMap(np.full((2, 3), 3.0))).values, 2.0
    )
    a, b = rng.random((3, 4)), rng.random((3, 4))
    np.testing.assert_allclose(flip_merge(DisparityMap(a), DisparityMap(b)).values, (a + b[:, ::-1]) / 2)
