"""Evaluation against ground-truth trajectories.

Velocity accuracy is scored per batch on the half-window rotation: the
geodesic angle between estimate and ground truth divided by the half-window
length, in deg/s. Absolute orientation error aligns the first poses (the
estimate's gauge is arbitrary) and reports the geodesic error series.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError
from .geometry import geodesic_angle


def gt_relative_rotation(trajectory, a, b):
    """Ground-truth relative rotation R_b R_a^T from interpolated poses."""
    return trajectory.orientation_at(b) @ trajectory.orientation_at(a).T


def velocity_error_series(rotations_half, windows, trajectory,
                          normalisation="half"):
    """Per-batch angular rate error in deg/s.

    rotations_half: (n, 3, 3) estimated half-window rotations; windows:
    (n, 2) batch spans [alpha, beta]. With the default normalisation the
    estimate is compared to ground truth over [alpha, alpha + delta] and the
    angle divided by delta; "full" squares the estimate, compares over the
    whole window, and divides by its length.
    """
    rotations_half = np.asarray(rotations_half, dtype=float)
    windows = np.asarray(windows, dtype=float)
    if rotations_half.ndim != 3 or windows.ndim != 2 or windows.shape[1] != 2:
        raise DataFormatError("need (n,3,3) rotations and (n,2) windows")
    if rotations_half.shape[0] != windows.shape[0]:
        raise DataFormatError(
            f"{rotations_half.shape[0]} estimates for {windows.shape[0]} windows"
        )
    if normalisation not in ("half", "full"):
        raise ValueError("normalisation must be 'half' or 'full'")
    out = np.empty(windows.shape[0])
    for i, (alpha, beta) in enumerate(windows):
        delta = 0.5 * (beta - alpha)
        if normalisation == "half":
            R_est = rotations_half[i]
            R_gt = gt_relative_rotation(trajectory, alpha, alpha + delta)
            span = delta
        else:
            R_est = rotations_half[i] @ rotations_half[i]
            R_gt = gt_relative_rotation(trajectory, alpha, beta)
            span = 2.0 * delta
        out[i] = geodesic_angle(R_est, R_gt) / span
    return np.degrees(out)


def rms_velocity_error(rotations_half, windows, trajectory,
                       normalisation="half"):
    """Root-mean-square of the per-batch rate errors, deg/s."""
    series = velocity_error_series(rotations_half, windows, trajectory,
                                   normalisation)
    if series.size == 0:
        raise DataFormatError("no batches to evaluate")
    return float(np.sqrt(np.mean(series ** 2)))


@dataclass
class OrientationErrorReport:
    times: np.ndarray
    errors_deg: np.ndarray
    mean_deg: float
    max_deg: float
    final_deg: float


def absolute_orientation_error(estimate, truth):
    """Geodesic orientation error of a trajectory after first-pose alignment.

    Evaluated at every estimate timestamp inside the ground-truth span, with
    the ground truth interpolated there. The estimate's first overlapping
    pose is rotated onto the truth's, so a global gauge offset scores zero.
    """
    lo, hi = truth.span
    times = estimate.times
    inside = (times >= lo) & (times <= hi)
    if not inside.any():
        raise DataFormatError("trajectories do not overlap in time")
    times = times[inside]
    t0 = times[0]
    align = truth.orientation_at(t0) @ estimate.orientation_at(t0).T
    errs = np.empty(times.size)
    for i, t in enumerate(times):
        errs[i] = geodesic_angle(align @ estimate.orientation_at(t),
                                 truth.orientation_at(t))
    errs = np.degrees(errs)
    return OrientationErrorReport(
        times=times,
        errors_deg=errs,
        mean_deg=float(errs.mean()),
        max_deg=float(errs.max()),
        final_deg=float(errs[-1]),
    )
