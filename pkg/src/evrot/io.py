"""File formats and the interpolated trajectory type.

Three plain-text formats, one record per line, '#' comments allowed:

* events: ``t x y p`` with polarity written 0/1 and held as -1/+1 in memory;
* calibration: a single line ``fx fy cx cy k1 k2 width height``;
* trajectory: ``t qx qy qz qw`` with unit quaternions (scalar last).

Readers reject malformed input instead of repairing it; error messages name
the offending line. Writers use shortest-exact float formatting so a
write/read round trip reproduces the stream bit for bit.
"""

import warnings

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .camera import CameraIntrinsics
from .errors import DataFormatError, InsufficientDataError
from .events import EventArray

QUAT_NORM_TOL = 1e-3


def _load_columns(path, n_cols, what):
    try:
        with warnings.catch_warnings():
            # empty files are legal and handled below
            warnings.simplefilter("ignore", UserWarning)
            data = np.loadtxt(path, dtype=float, comments="#", ndmin=2)
    except Exception as exc:
        raise DataFormatError(f"{what} file {path}: {_describe_bad_line(path)}") from exc
    if data.size == 0:
        return np.empty((0, n_cols))
    if data.shape[1] != n_cols:
        raise DataFormatError(
            f"{what} file {path}: expected {n_cols} columns, found {data.shape[1]}"
        )
    if not np.all(np.isfinite(data)):
        row = int(np.flatnonzero(~np.isfinite(data).all(axis=1))[0])
        raise DataFormatError(f"{what} file {path}: non-finite value in record {row + 1}")
    return data


def _describe_bad_line(path):
    """Best-effort location of the first unparseable line."""
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                for tok in stripped.split():
                    try:
                        float(tok)
                    except ValueError:
                        return f"unparseable value {tok!r} on line {lineno}"
    except OSError as exc:
        return str(exc)
    return "could not be parsed"


def read_events(path):
    """Load an event stream; times must be non-decreasing, polarity 0/1."""
    data = _load_columns(path, 4, "event")
    t = data[:, 0]
    if t.size and np.any(np.diff(t) < 0):
        row = int(np.flatnonzero(np.diff(t) < 0)[0])
        raise DataFormatError(
            f"event file {path}: timestamps decrease at record {row + 2}"
        )
    p_raw = data[:, 3]
    if not np.all((p_raw == 0.0) | (p_raw == 1.0)):
        row = int(np.flatnonzero((p_raw != 0.0) & (p_raw != 1.0))[0])
        raise DataFormatError(
            f"event file {path}: polarity must be 0 or 1 (record {row + 1})"
        )
    p = np.where(p_raw == 1.0, 1, -1).astype(np.int8)
    return EventArray(t, data[:, 1:3], p, check=False)


def write_events(path, events):
    """Write an event stream with exact float round-tripping."""
    p01 = (events.p > 0).astype(int)
    cols = np.column_stack((events.t, events.xy[:, 0], events.xy[:, 1], p01))
    np.savetxt(path, cols, fmt=["%.17g", "%.17g", "%.17g", "%d"])


def read_calibration(path):
    data = _load_columns(path, 8, "calibration")
    if data.shape[0] != 1:
        raise DataFormatError(
            f"calibration file {path}: expected exactly one record, "
            f"found {data.shape[0]}"
        )
    fx, fy, cx, cy, k1, k2, width, height = data[0]
    if fx <= 0 or fy <= 0:
        raise DataFormatError(f"calibration file {path}: focal lengths must be positive")
    if width <= 0 or height <= 0 or width != int(width) or height != int(height):
        raise DataFormatError(f"calibration file {path}: bad sensor size")
    return CameraIntrinsics(fx, fy, cx, cy, k1, k2, int(width), int(height))


def write_calibration(path, intr):
    with open(path, "w") as fh:
        fh.write(
            "%.17g %.17g %.17g %.17g %.17g %.17g %d %d\n"
            % (intr.fx, intr.fy, intr.cx, intr.cy, intr.k1, intr.k2,
               intr.width, intr.height)
        )


class Trajectory:
    """Time-stamped orientations with spherical interpolation between them.

    Orientations are rotations taking reference-frame directions into the
    camera frame at each timestamp. Quaternions are stored scalar-last.
    """

    def __init__(self, times, quats):
        times = np.asarray(times, dtype=float)
        quats = np.asarray(quats, dtype=float)
        if times.ndim != 1 or quats.shape != (times.size, 4):
            raise DataFormatError("trajectory needs times (n,) and quaternions (n, 4)")
        if times.size < 1:
            raise InsufficientDataError("trajectory needs at least one record")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise DataFormatError("trajectory times must be strictly increasing")
        norms = np.linalg.norm(quats, axis=1)
        if np.any(np.abs(norms - 1.0) > QUAT_NORM_TOL):
            row = int(np.flatnonzero(np.abs(norms - 1.0) > QUAT_NORM_TOL)[0])
            raise DataFormatError(
                f"trajectory quaternion {row + 1} is not unit length "
                f"(norm {norms[row]:.6f})"
            )
        self.times = times
        self.quats = quats / norms[:, None]
        self._slerp = None

    def __len__(self):
        return self.times.size

    @property
    def span(self):
        return float(self.times[0]), float(self.times[-1])

    @classmethod
    def from_matrices(cls, times, matrices):
        quats = Rotation.from_matrix(np.asarray(matrices)).as_quat()
        return cls(times, np.atleast_2d(quats))

    def matrices(self):
        return Rotation.from_quat(self.quats).as_matrix().reshape(-1, 3, 3)

    def orientation_at(self, t):
        """Interpolated rotation matrix at time t (within the span)."""
        return self.orientations_at(np.array([float(t)]))[0]

    def orientations_at(self, ts):
        ts = np.asarray(ts, dtype=float)
        t0, t1 = self.span
        if np.any(ts < t0 - 1e-9) or np.any(ts > t1 + 1e-9):
            raise InsufficientDataError(
                f"query time outside trajectory span [{t0:.6f}, {t1:.6f}]"
            )
        if len(self) == 1:
            return np.repeat(self.matrices(), ts.size, axis=0)
        if self._slerp is None:
            self._slerp = Slerp(self.times, Rotation.from_quat(self.quats))
        return self._slerp(np.clip(ts, t0, t1)).as_matrix().reshape(-1, 3, 3)

    def relative_rotation(self, a, b):
        """Rotation from the orientation at time a to the one at time b."""
        Ra, Rb = self.orientations_at(np.array([a, b], dtype=float))
        return Rb @ Ra.T


def read_trajectory(path):
    data = _load_columns(path, 5, "trajectory")
    if data.shape[0] == 0:
        raise InsufficientDataError(f"trajectory file {path} is empty")
    return Trajectory(data[:, 0], data[:, 1:5])


def write_trajectory(path, trajectory):
    cols = np.column_stack((trajectory.times, trajectory.quats))
    np.savetxt(path, cols, fmt="%.17g")


def write_trajectory_csv(path, trajectory):
    """Trajectory as CSV with header, the odometry CLI output format."""
    with open(path, "w") as fh:
        fh.write("t,qx,qy,qz,qw\n")
        for t, q in zip(trajectory.times, trajectory.quats):
            fh.write("%.9f,%.17g,%.17g,%.17g,%.17g\n" % (t, q[0], q[1], q[2], q[3]))
