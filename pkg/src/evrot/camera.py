"""Pinhole camera model with two-term radial distortion.

Pixel coordinates are continuous, origin at the top-left pixel centre.
Rays are unit 3-vectors in the camera frame with positive z.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

# Fixed-point undistortion: iteration count and pixel-space tolerance.
UNDISTORT_ITERS = 10
UNDISTORT_TOL_PX = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths, principal point, radial distortion and sensor size."""

    fx: float
    fy: float
    cx: float
    cy: float
    k1: float = 0.0
    k2: float = 0.0
    width: int = 0
    height: int = 0

    def matrix(self):
        """3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def has_distortion(self):
        return self.k1 != 0.0 or self.k2 != 0.0


def _distort_normalized(xn, yn, intr):
    r2 = xn * xn + yn * yn
    scale = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
    return xn * scale, yn * scale


def distort_pixels(pixels, intr):
    """Apply the forward radial model to ideal pixel coordinates."""
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    xn = (pixels[:, 0] - intr.cx) / intr.fx
    yn = (pixels[:, 1] - intr.cy) / intr.fy
    xd, yd = _distort_normalized(xn, yn, intr)
    return np.column_stack((xd * intr.fx + intr.cx, yd * intr.fy + intr.cy))


def undistort_pixels(pixels, intr):
    """Invert the radial model by fixed-point iteration.

    Runs a fixed number of iterations and then checks that pushing the result
    back through the forward model reproduces the input to within
    UNDISTORT_TOL_PX; divergent inputs raise DegenerateInputError.
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    if not intr.has_distortion:
        return pixels.copy()
    xd = (pixels[:, 0] - intr.cx) / intr.fx
    yd = (pixels[:, 1] - intr.cy) / intr.fy
    xn, yn = xd.copy(), yd.copy()
    for _ in range(UNDISTORT_ITERS):
        r2 = xn * xn + yn * yn
        scale = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
        xn = xd / scale
        yn = yd / scale
    xb, yb = _distort_normalized(xn, yn, intr)
    err = np.hypot((xb - xd) * intr.fx, (yb - yd) * intr.fy)
    worst = float(err.max()) if err.size else 0.0
    if worst > UNDISTORT_TOL_PX:
        raise DegenerateInputError(
            f"undistortion did not converge: max residual {worst:.3e} px"
        )
    return np.column_stack((xn * intr.fx + intr.cx, yn * intr.fy + intr.cy))


def backproject(pixels, intr):
    """Ideal (already undistorted) pixels to unit rays, shape (n, 3).

    Equivalent to normalising K^-1 [u, v, 1]; z is positive by construction.
    """
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    x = (pixels[:, 0] - intr.cx) / intr.fx
    y = (pixels[:, 1] - intr.cy) / intr.fy
    rays = np.column_stack((x, y, np.ones(len(x))))
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    return rays


def pixel_to_ray(pixels, intr):
    """Observed pixels to unit rays, undistorting first when needed."""
    if intr.has_distortion:
        pixels = undistort_pixels(pixels, intr)
    return backproject(pixels, intr)


def project(rays, intr):
    """Unit rays to ideal pixel coordinates.

    Returns (pixels, valid) where valid is False for rays with z <= 0, whose
    pixel rows are NaN. No distortion is applied; callers working with
    distorted observations should compare in the undistorted frame.
    """
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    z = rays[:, 2]
    valid = z > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * rays[:, 0] / z + intr.cx
        v = intr.fy * rays[:, 1] / z + intr.cy
    pixels = np.column_stack((u, v))
    pixels[~valid] = np.nan
    return pixels, valid
