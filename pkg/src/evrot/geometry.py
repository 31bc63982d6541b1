"""Rotation utilities on SO(3).

Rotations are plain 3x3 numpy arrays acting on column vectors; rotation
vectors (axis * angle, radians) are arrays of shape (3,). Angular velocities
are rotation vectors per second. All angles returned by this module lie in
[0, pi].
"""

import numpy as np

from .errors import DegenerateGeometryError

# Below this angle the Rodrigues coefficients are replaced by their
# second-order series to avoid 0/0.
SMALL_ANGLE = 1e-8


def hat(r):
    """Skew-symmetric matrix such that hat(r) @ v == cross(r, v)."""
    x, y, z = r
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def so3_exp(r):
    """Exponential map: rotation vector (3,) to rotation matrix (3, 3).

    Uses the closed-form Rodrigues formula, falling back to the second-order
    series for angles below SMALL_ANGLE.
    """
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r)
    W = hat(r)
    if angle < SMALL_ANGLE:
        return np.eye(3) + W + 0.5 * (W @ W)
    a = np.sin(angle) / angle
    b = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + a * W + b * (W @ W)


def _quaternion_from_matrix(R):
    """Unit quaternion (x, y, z, w) with w >= 0 for a rotation matrix.

    Shepperd's method: pick the largest of the four squared components so the
    extraction stays well-conditioned for every angle, including near pi.
    """
    t = np.trace(R)
    q = np.empty(4)
    if t > R[0, 0] and t > R[1, 1] and t > R[2, 2]:
        s = np.sqrt(1.0 + t) * 2.0
        q[3] = 0.25 * s
        q[0] = (R[2, 1] - R[1, 2]) / s
        q[1] = (R[0, 2] - R[2, 0]) / s
        q[2] = (R[1, 0] - R[0, 1]) / s
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q[0] = 0.25 * s
        q[1] = (R[0, 1] + R[1, 0]) / s
        q[2] = (R[0, 2] + R[2, 0]) / s
        q[3] = (R[2, 1] - R[1, 2]) / s
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q[0] = (R[0, 1] + R[1, 0]) / s
        q[1] = 0.25 * s
        q[2] = (R[1, 2] + R[2, 1]) / s
        q[3] = (R[0, 2] - R[2, 0]) / s
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q[0] = (R[0, 2] + R[2, 0]) / s
        q[1] = (R[1, 2] + R[2, 1]) / s
        q[2] = 0.25 * s
        q[3] = (R[1, 0] - R[0, 1]) / s
    if q[3] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def so3_log(R):
    """Principal logarithm: rotation matrix to rotation vector with norm <= pi.

    Goes through the unit quaternion so the extraction is stable both near
    the identity and near half-turns, where trace-based formulas lose digits.
    """
    q = _quaternion_from_matrix(np.asarray(R, dtype=float))
    v = q[:3]
    w = q[3]
    n = np.linalg.norm(v)
    angle = 2.0 * np.arctan2(n, w)
    if n < SMALL_ANGLE:
        # angle ~ 2n/w; the series keeps the direction exact for tiny angles
        return v * (2.0 / w) * (1.0 - n * n / (3.0 * w * w))
    return v * (angle / n)


def geodesic_angle(R1, R2):
    """Geodesic distance between two rotations, radians in [0, pi]."""
    return float(np.linalg.norm(so3_log(R1 @ R2.T)))


def relative_rotation(omega, dt):
    """Rotation accumulated over dt seconds at constant angular velocity."""
    return so3_exp(np.asarray(omega, dtype=float) * dt)


def is_rotation(R, tol=1e-9):
    """True when R is orthonormal with unit determinant within tol."""
    R = np.asarray(R)
    if R.shape != (3, 3):
        return False
    err = np.linalg.norm(R.T @ R - np.eye(3))
    return bool(err <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


def check_rotation(R, tol=1e-9):
    """Raise DegenerateGeometryError unless R is a rotation matrix."""
    if not is_rotation(R, tol=tol):
        raise DegenerateGeometryError("matrix is not a rotation within tolerance")
    return R
