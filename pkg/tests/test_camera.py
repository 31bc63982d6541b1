import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evrot.camera import (
    CameraIntrinsics,
    backproject,
    distort_pixels,
    pixel_to_ray,
    project,
    undistort_pixels,
)
from evrot.errors import DegenerateInputError

PINHOLE = CameraIntrinsics(fx=200.0, fy=210.0, cx=160.0, cy=120.0, width=320, height=240)
BARREL = CameraIntrinsics(
    fx=200.0, fy=210.0, cx=160.0, cy=120.0, k1=-0.28, k2=0.12, width=320, height=240
)

interior_px = st.tuples(st.floats(10.0, 310.0), st.floats(10.0, 230.0)).map(
    lambda p: np.array([p], dtype=np.float64)
)


def test_matrix_layout():
    K = PINHOLE.matrix()
    np.testing.assert_array_equal(
        K, [[200.0, 0.0, 160.0], [0.0, 210.0, 120.0], [0.0, 0.0, 1.0]]
    )


def test_has_distortion_flag():
    assert not PINHOLE.has_distortion
    assert BARREL.has_distortion


def test_center_pixel_is_optical_axis():
    ray = backproject(np.array([[160.0, 120.0]]), PINHOLE)
    np.testing.assert_allclose(ray, [[0.0, 0.0, 1.0]], atol=1e-15)


def test_known_offset_pixel():
    # one focal length right of center: 45 degrees in x
    ray = backproject(np.array([[360.0, 120.0]]), PINHOLE)
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(ray, [[s, 0.0, s]], atol=1e-12)


@given(px=interior_px)
def test_rays_are_unit_and_forward(px):
    ray = backproject(px, PINHOLE)
    assert abs(np.linalg.norm(ray[0]) - 1.0) < 1e-12
    assert ray[0, 2] > 0.0


@given(px=interior_px)
def test_project_inverts_backproject(px):
    rays = backproject(px, PINHOLE)
    back, valid = project(rays, PINHOLE)
    assert valid.all()
    np.testing.assert_allclose(back, px, atol=1e-9)


@given(px=interior_px)
def test_distortion_round_trip(px):
    distorted = distort_pixels(px, BARREL)
    recovered = undistort_pixels(distorted, BARREL)
    np.testing.assert_allclose(recovered, px, atol=1e-6)


def test_undistort_is_identity_without_distortion():
    px = np.array([[12.5, 200.0], [300.0, 40.0]])
    np.testing.assert_array_equal(undistort_pixels(px, PINHOLE), px)


def test_pixel_to_ray_applies_undistortion():
    px = np.array([[40.0, 40.0]])
    via_steps = backproject(undistort_pixels(px, BARREL), BARREL)
    np.testing.assert_allclose(pixel_to_ray(px, BARREL), via_steps, atol=1e-15)


def test_undistort_divergence_raises():
    wild = CameraIntrinsics(
        fx=200.0, fy=200.0, cx=160.0, cy=120.0, k1=8.0, k2=-40.0, width=320, height=240
    )
    with pytest.raises(DegenerateInputError):
        undistort_pixels(np.array([[0.0, 0.0]]), wild)


def test_project_rejects_backward_rays():
    rays = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.1, 0.0, 0.0]])
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    px, valid = project(rays, PINHOLE)
    assert valid.tolist() == [True, False, False]
    assert np.isnan(px[1]).all() and np.isnan(px[2]).all()
    assert np.isfinite(px[0]).all()
