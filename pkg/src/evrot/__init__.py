"""Rotational motion estimation from event camera streams.

Per-batch angular velocity by temporally split trimmed registration, a
contrast-maximisation baseline, and a batched visual-odometry pipeline with
feature tracks and robust rotation averaging, plus a synthetic generator and
evaluation utilities.
"""

from .bench import BenchRow, consecutive_batches, estimate_batches, run_bench
from .camera import CameraIntrinsics, pixel_to_ray, project
from .contrast import (
    CmConfig,
    CmResult,
    Iwe,
    accumulate_iwe,
    cm_objective,
    cm_solve,
    contrast,
    warp_events,
)
from .errors import (
    DataFormatError,
    DegenerateGeometryError,
    DegenerateInputError,
    EvrotError,
    InsufficientDataError,
    OptimizationFailureError,
)
from .events import Event, EventArray, EventBatch
from .geometry import (
    geodesic_angle,
    hat,
    relative_rotation,
    so3_exp,
    so3_log,
)
from .io import (
    Trajectory,
    read_calibration,
    read_events,
    read_trajectory,
    write_calibration,
    write_events,
    write_trajectory,
    write_trajectory_csv,
)
from .metrics import (
    OrientationErrorReport,
    absolute_orientation_error,
    gt_relative_rotation,
    rms_velocity_error,
    velocity_error_series,
)
from .registration import (
    RegistrationConfig,
    RegistrationResult,
    fit_rotation,
    match_events,
    recover_velocity,
    solve,
)
from .synth import (
    MotionScript,
    default_intrinsics,
    generate_batch,
    generate_stream,
    random_landmarks,
    wobble_script,
)
from .vo import (
    FeatureTrack,
    VoConfig,
    VoResult,
    estimate_pairwise,
    extend_tracks,
    key_batch_decision,
    rotation_averaging,
    stream_batches,
    vo_run,
)

__version__ = "0.1.0"

__all__ = [
    "BenchRow", "consecutive_batches", "estimate_batches", "run_bench",
    "CameraIntrinsics", "pixel_to_ray", "project",
    "CmConfig", "CmResult", "Iwe", "accumulate_iwe", "cm_objective",
    "cm_solve", "contrast", "warp_events",
    "DataFormatError", "DegenerateGeometryError", "DegenerateInputError",
    "EvrotError", "InsufficientDataError", "OptimizationFailureError",
    "Event", "EventArray", "EventBatch",
    "geodesic_angle", "hat", "relative_rotation", "so3_exp", "so3_log",
    "Trajectory", "read_calibration", "read_events", "read_trajectory",
    "write_calibration", "write_events", "write_trajectory",
    "write_trajectory_csv",
    "OrientationErrorReport", "absolute_orientation_error",
    "gt_relative_rotation", "rms_velocity_error", "velocity_error_series",
    "RegistrationConfig", "RegistrationResult", "fit_rotation",
    "match_events", "recover_velocity", "solve",
    "MotionScript", "default_intrinsics", "generate_batch", "generate_stream",
    "random_landmarks", "wobble_script",
    "FeatureTrack", "VoConfig", "VoResult", "estimate_pairwise",
    "extend_tracks", "key_batch_decision", "rotation_averaging",
    "stream_batches", "vo_run",
]
