"""Synthetic event generation with exact rotational ground truth.

The scene is a set of fixed landmark directions (unit rays in the camera
frame at the reference orientation). A rotating camera observes them; each
observation is the landmark direction rotated into the current camera frame
and projected through the intrinsics. Before any noise is applied the
generated correspondences satisfy the half-window rotation model exactly,
which is what makes these streams usable as an oracle for the estimators.

Noise knobs (pixel noise, outlier fraction, timestamp jitter, quantisation)
never change the number of events; only frame-exit visibility does.
"""

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, backproject, project
from .errors import InsufficientDataError
from .events import EventArray, EventBatch
from .geometry import so3_exp
from .io import Trajectory

TRAJECTORY_RATE = 125.0
DEFAULT_JITTER_FRACTION = 0.1  # of the temporal gate width, for batches


def default_intrinsics(width=346, height=260, focal=170.0):
    """A mid-resolution distortion-free camera centred on the sensor."""
    return CameraIntrinsics(
        fx=focal, fy=focal, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
    )


def random_landmarks(n, intrinsics, rng, margin=0.18):
    """n unit rays whose reference projections lie inside the frame margin."""
    w, h = intrinsics.width, intrinsics.height
    px = np.column_stack((
        rng.uniform(margin * w, (1.0 - margin) * w - 1.0, n),
        rng.uniform(margin * h, (1.0 - margin) * h - 1.0, n),
    ))
    return backproject(px, intrinsics)


def rotate_rays(rays, omega, dts):
    """Rotate each ray i about the fixed axis of omega by |omega| * dts[i].

    Vectorised Rodrigues formula; the degenerate zero-velocity case returns
    the rays unchanged.
    """
    rays = np.asarray(rays, dtype=float)
    speed = float(np.linalg.norm(omega))
    if speed == 0.0:
        return rays.copy()
    axis = np.asarray(omega, dtype=float) / speed
    theta = speed * np.asarray(dts, dtype=float)
    c = np.cos(theta)[:, None]
    s = np.sin(theta)[:, None]
    cross = np.cross(np.broadcast_to(axis, rays.shape), rays)
    dot = rays @ axis
    return rays * c + cross * s + axis[None, :] * (dot * (1.0 - c[:, 0]))[:, None]


class MotionScript:
    """Piecewise-constant angular velocity profile starting at identity."""

    def __init__(self, durations, omegas, t_start=0.0):
        durations = np.asarray(durations, dtype=float)
        omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
        if durations.ndim != 1 or omegas.shape != (durations.size, 3):
            raise ValueError("need matching segment durations and velocities")
        if durations.size == 0 or np.any(durations <= 0):
            raise ValueError("segment durations must be positive")
        self.t_start = float(t_start)
        self.durations = durations
        self.omegas = omegas
        self.boundaries = self.t_start + np.concatenate(([0.0], np.cumsum(durations)))
        # orientation at the start of each segment, chained in closed form
        mats = [np.eye(3)]
        for dur, om in zip(durations[:-1], omegas[:-1]):
            mats.append(so3_exp(om * dur) @ mats[-1])
        self._segment_start_orientations = mats

    @classmethod
    def constant(cls, omega, duration, t_start=0.0):
        return cls([duration], [omega], t_start=t_start)

    @property
    def duration(self):
        return float(self.boundaries[-1] - self.boundaries[0])

    @property
    def t_end(self):
        return float(self.boundaries[-1])

    def segment_of(self, t):
        ts = np.asarray(t, dtype=float)
        if np.any(ts < self.t_start - 1e-9) or np.any(ts > self.t_end + 1e-9):
            raise ValueError("time outside the script span")
        seg = np.searchsorted(self.boundaries, ts, side="right") - 1
        return np.clip(seg, 0, self.durations.size - 1)

    def omega_at(self, t):
        return self.omegas[self.segment_of(t)]

    def orientation_at(self, t):
        """Rotation taking reference-frame directions into the camera frame."""
        seg = int(self.segment_of(float(t)))
        dt = float(t) - self.boundaries[seg]
        return so3_exp(self.omegas[seg] * dt) @ self._segment_start_orientations[seg]

    def relative_rotation(self, a, b):
        return self.orientation_at(b) @ self.orientation_at(a).T

    def trajectory(self, rate=TRAJECTORY_RATE):
        """Ground-truth orientations sampled on a regular grid."""
        n = int(np.floor(self.duration * rate)) + 1
        times = self.t_start + np.arange(n) / rate
        mats = np.stack([self.orientation_at(t) for t in times])
        return Trajectory.from_matrices(times, mats)


def wobble_script(rng, duration, magnitude=0.4, segment_duration=1.0,
                  t_start=0.0):
    """Piecewise-constant script with bounded orientation excursion.

    Segments come in cancelling pairs (a velocity followed by its negation)
    with a fresh random axis per pair, so the orientation never wanders more
    than ``magnitude * segment_duration`` radians from the reference. Useful
    for long streams that must keep the scene in view.
    """
    n_pairs = max(int(np.ceil(duration / (2.0 * segment_duration))), 1)
    durations = []
    omegas = []
    for _ in range(n_pairs):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        speed = magnitude * rng.uniform(0.5, 1.0)
        durations.extend([segment_duration, segment_duration])
        omegas.extend([axis * speed, -axis * speed])
    total = 2.0 * n_pairs * segment_duration
    if total > duration:
        # trim the final segment so the script spans exactly `duration`
        durations[-1] -= total - duration
        if durations[-1] <= 0:
            durations.pop()
            omegas.pop()
    return MotionScript(durations, omegas, t_start=t_start)


@dataclass(frozen=True)
class BatchTruth:
    """Exact motion behind a generated batch."""

    omega: np.ndarray
    rotation_half: np.ndarray
    rotation_full: np.ndarray


def _ranges(counts):
    """Concatenated arange(c) for each c in counts; all counts positive."""
    ends = np.cumsum(counts)
    step = np.ones(int(ends[-1]), dtype=np.int64)
    step[0] = 0
    step[ends[:-1]] = 1 - counts[:-1]
    return np.cumsum(step)


def _in_frame(pixels, intrinsics):
    return (
        (pixels[:, 0] >= 0.0) & (pixels[:, 0] <= intrinsics.width - 1.0)
        & (pixels[:, 1] >= 0.0) & (pixels[:, 1] <= intrinsics.height - 1.0)
    )


def generate_batch(landmarks, omega, n_events, duration, intrinsics, rng,
                   t_start=0.0, noise_px=0.0, outlier_fraction=0.0,
                   jitter_fraction=0.0, quantize=False):
    """One batch of paired events under constant angular velocity.

    Events come in pairs exactly one half-window apart: the second event of
    each pair is the first one advanced by the half-window rotation, so with
    all noise knobs at zero the registration model holds exactly. Returns
    ``(batch, truth)``.

    jitter_fraction scales the conventional temporal gate width (2% of the
    window); DEFAULT_JITTER_FRACTION is the usual level when jitter is
    wanted at all.
    """
    if n_events % 2 or n_events < 2:
        raise ValueError("n_events must be even and positive (events are paired)")
    landmarks = np.asarray(landmarks, dtype=float)
    omega = np.asarray(omega, dtype=float)
    n_pairs = n_events // 2
    delta = 0.5 * duration
    jitter = jitter_fraction * (0.02 * duration)

    t_lo = t_start + jitter
    t_hi = t_start + delta - jitter
    if not t_hi > t_lo:
        raise ValueError("jitter too large for the window")

    land_idx = np.empty(n_pairs, dtype=np.int64)
    t1 = np.empty(n_pairs)
    px1 = np.empty((n_pairs, 2))
    px2 = np.empty((n_pairs, 2))
    pending = np.arange(n_pairs)
    for _ in range(1000):
        if pending.size == 0:
            break
        li = rng.integers(0, landmarks.shape[0], pending.size)
        ts = rng.uniform(t_lo, t_hi, pending.size)
        r1 = rotate_rays(landmarks[li], omega, ts - t_start)
        r2 = rotate_rays(r1, omega, np.full(pending.size, delta))
        p1, ok1 = project(r1, intrinsics)
        p2, ok2 = project(r2, intrinsics)
        good = ok1 & ok2 & _in_frame(p1, intrinsics) & _in_frame(p2, intrinsics)
        keep = pending[good]
        land_idx[keep] = li[good]
        t1[keep] = ts[good]
        px1[keep] = p1[good]
        px2[keep] = p2[good]
        pending = pending[~good]
    if pending.size:
        raise InsufficientDataError(
            "could not keep generated events in frame; motion too fast for the scene"
        )

    times = np.concatenate((t1, t1 + delta))
    pixels = np.vstack((px1, px2))
    pol = np.tile(np.where(rng.random(n_pairs) < 0.5, 1, -1).astype(np.int8), 2)

    if jitter > 0.0:
        times = times + rng.uniform(-jitter, jitter, times.size)
    if noise_px > 0.0:
        pixels = pixels + rng.normal(0.0, noise_px, pixels.shape)
    n_out = int(round(outlier_fraction * n_events))
    if n_out:
        out_idx = rng.choice(n_events, size=n_out, replace=False)
        pixels[out_idx, 0] = rng.uniform(0.0, intrinsics.width - 1.0, n_out)
        pixels[out_idx, 1] = rng.uniform(0.0, intrinsics.height - 1.0, n_out)
        times[out_idx] = rng.uniform(t_start, t_start + duration, n_out)
        pol[out_idx] = np.where(rng.random(n_out) < 0.5, 1, -1)
    if quantize:
        pixels = np.rint(pixels)

    order = np.argsort(times, kind="stable")
    batch = EventBatch(times[order], pixels[order], pol[order],
                       window=(t_start, t_start + duration), check=False)
    truth = BatchTruth(
        omega=omega.copy(),
        rotation_half=so3_exp(omega * delta),
        rotation_full=so3_exp(omega * duration),
    )
    return batch, truth


def generate_stream(landmarks, script, intrinsics, rng, rate, pair_dt=0.025,
                    noise_px=0.0, outlier_fraction=0.0, jitter_s=0.0,
                    quantize=False):
    """A long event stream following a motion script.

    Events come from periodic firing trains: each train repeats one landmark
    with period ``pair_dt`` at a random phase, so every event has temporal
    partners at exact multiples of ``pair_dt`` until its landmark leaves the
    frame. Registration over any half-window that is a multiple of pair_dt
    therefore finds exact correspondences. The train count is chosen so the
    total rate matches ``rate`` (landmarks repeat across trains when there
    are fewer than rate*pair_dt of them). ``jitter_s`` adds per-event
    timestamp noise, degrading the pairing by that amount. Returns
    ``(events, trajectory)`` with the ground-truth trajectory at 125 Hz.
    """
    landmarks = np.asarray(landmarks, dtype=float)
    n_land = landmarks.shape[0]
    duration = script.duration
    n_trains = int(round(rate * pair_dt))
    if n_trains < 1 or duration < 2.0 * pair_dt:
        raise InsufficientDataError("stream too short for the requested rate")

    phases = script.t_start + rng.uniform(0.0, pair_dt, n_trains)
    counts = np.floor((script.t_end - phases) / pair_dt).astype(np.int64) + 1
    times = np.repeat(phases, counts) + pair_dt * _ranges(counts)
    land_idx = np.repeat(np.arange(n_trains) % n_land, counts)
    train_pol = np.where(rng.random(n_trains) < 0.5, 1, -1).astype(np.int8)
    pol = np.repeat(train_pol, counts)
    if jitter_s > 0.0:
        times = times + rng.uniform(-jitter_s, jitter_s, times.size)
        np.clip(times, script.t_start, script.t_end, out=times)

    # rotate landmark rays into the camera frame segment by segment, where
    # the velocity is constant and the rotation vectorises
    rays = np.empty((times.size, 3))
    seg = script.segment_of(times)
    for s in range(script.durations.size):
        mask = seg == s
        if not np.any(mask):
            continue
        base = landmarks @ script._segment_start_orientations[s].T
        rays[mask] = rotate_rays(base[land_idx[mask]], script.omegas[s],
                                 times[mask] - script.boundaries[s])

    pixels, ok = project(rays, intrinsics)
    visible = ok & _in_frame(pixels, intrinsics)
    times = times[visible]
    pixels = pixels[visible]
    pol = pol[visible]

    if noise_px > 0.0:
        pixels = pixels + rng.normal(0.0, noise_px, pixels.shape)
    n_out = int(round(outlier_fraction * times.size))
    if n_out:
        out_idx = rng.choice(times.size, size=n_out, replace=False)
        pixels[out_idx, 0] = rng.uniform(0.0, intrinsics.width - 1.0, n_out)
        pixels[out_idx, 1] = rng.uniform(0.0, intrinsics.height - 1.0, n_out)
        times[out_idx] = rng.uniform(script.t_start, script.t_end, n_out)
        pol[out_idx] = np.where(rng.random(n_out) < 0.5, 1, -1)
    if quantize:
        pixels = np.rint(pixels)

    order = np.argsort(times, kind="stable")
    events = EventArray(times[order], pixels[order], pol[order], check=False)
    return events, script.trajectory()
