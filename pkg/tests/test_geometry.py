import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdk.core import DepthMap, InvalidInputError, RgbImage
from rdk.geometry import (
    Intrinsics,
    RigidPose,
    bilinear_sample,
    reproject,
    resize_bilinear,
    rotate,
    synthesize_view,
)

K = Intrinsics(fx=50.0, fy=48.0, cx=15.5, cy=11.5)


def test_identity_pose_reproduces_pixels(rng):
    img = RgbImage(rng.random((24, 32, 3)))
    depth = DepthMap(rng.uniform(1, 20, (24, 32)))
    out, cov = synthesize_view(img, depth, RigidPose.identity(), K)
    assert cov.all()
    assert np.max(np.abs(out.data - img.data)) < 1e-12


def test_x_translation_shift_matches_closed_form():
    z, tx = 4.0, 0.3
    depth = DepthMap(np.full((24, 32), z))
    grid = reproject(depth, RigidPose(np.eye(3), [tx, 0, 0]), K)
    u = np.arange(32.0)[None, :]
    np.testing.assert_allclose(grid.u - u, K.fx * tx / z, atol=1e-9)
    np.testing.assert_allclose(grid.v - np.arange(24.0)[:, None], 0.0, atol=1e-12)


def test_points_behind_camera_are_uncovered():
    depth = DepthMap(np.full((4, 4), 1.0))
    grid = reproject(depth, RigidPose(np.eye(3), [0, 0, -2.0]), K)
    assert not grid.in_bounds.any()


def test_pose_validation_and_inverse():
    with pytest.raises(InvalidInputError):
        RigidPose(np.eye(3) * 2, [0, 0, 0])
    t = np.deg2rad(20)
    r = np.array([[np.cos(t), 0, np.sin(t)], [0, 1, 0], [-np.sin(t), 0, np.cos(t)]])
    p = RigidPose(r, [1.0, 2.0, 3.0])
    q = p.inverse()
    np.testing.assert_allclose(q.rotation @ p.rotation, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(q.rotation @ p.translation + q.translation, 0, atol=1e-12)


def test_pose_dict_round_trip():
    p = RigidPose(np.eye(3), [0.5, 0.0, -1.0])
    q = RigidPose.from_dict(p.to_dict())
    np.testing.assert_array_equal(q.translation, p.translation)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 6), st.floats(0, 4))
def test_bilinear_reproduces_affine_fields(u, v):
    # bilinear interpolation is exact on functions affine in (u, v)
    yy, xx = np.mgrid[0:5, 0:7].astype(float)
    field = 2.0 * xx - 3.0 * yy + 1.0
    got = bilinear_sample(field, np.array([u]), np.array([v]))[0]
    assert got == pytest.approx(2 * u - 3 * v + 1, abs=1e-12)


def test_rotate_by_zero_is_identity(rng):
    img = RgbImage(rng.random((9, 11, 3)))
    assert rotate(img, 0.0) is img


def test_rotate_90_matches_rot90_on_square(rng):
    data = rng.random((7, 7, 3))
    out = rotate(RgbImage(data), 90.0)
    # output pixel (x, y) samples source (cx + cy - y ... ) -> a quarter turn
    candidates = [np.rot90(data, 1, axes=(0, 1)), np.rot90(data, -1, axes=(0, 1))]
    assert min(np.max(np.abs(out.data - c)) for c in candidates) < 1e-12


def test_resize_keeps_corners():
    a = np.arange(12.0).reshape(3, 4)
    out = resize_bilinear(a, 5, 7)
    assert out[0, 0] == a[0, 0] and out[-1, -1] == a[-1, -1]
    assert out[0, -1] == a[0, -1] and out[-1, 0] == a[-1, 0]
