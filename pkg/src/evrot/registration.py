"""Rotation estimation by registering the two temporal halves of a batch.

Over a short window the camera's angular velocity is treated as constant, so
an event at time t in the first half of a batch should reappear one
half-window later, rotated by the half-window rotation. The solver matches
each first-half event against the second-half events inside a temporal gate,
keeps the best-matching fraction, and alternates nearest-neighbour
assignment with a closed-form orthogonal fit until the rotation stops
moving. The trimmed objective (sum of the kept chord residuals) is
non-increasing across iterations by construction: a step that would raise it
is rejected and the solver stops there.
"""

import math
from dataclasses import dataclass

import numpy as np

from .camera import pixel_to_ray
from .errors import DegenerateGeometryError, InsufficientDataError
from .geometry import geodesic_angle, so3_exp, so3_log
from .indexing import IntervalIndex, WindowSearch


@dataclass(frozen=True)
class RegistrationConfig:
    """Parameters of the split-batch registration solver.

    epsilon_t gives the temporal gate half-width in seconds; when None it is
    derived as epsilon_t_factor times the batch duration. trim_count, when
    set, overrides the fraction-derived count (the odometry loop drives the
    solver this way). match_polarity restricts gates to events of equal
    polarity.
    """

    epsilon_t: float | None = None
    epsilon_t_factor: float = 0.02
    trim_fraction: float = 0.8
    trim_count: int | None = None
    max_iters: int = 30
    step_tol: float = 1e-6
    match_polarity: bool = False

    def gate_width(self, duration):
        if self.epsilon_t is not None:
            return self.epsilon_t
        return self.epsilon_t_factor * duration


@dataclass
class RegistrationResult:
    """Solver output for one batch."""

    rotation_half: np.ndarray       # rotation over the half window
    rotation_full: np.ndarray       # rotation over the whole window
    omega: np.ndarray               # angular velocity, rad/s
    window: tuple
    src_index: np.ndarray           # kept correspondences, first-half side
    dst_index: np.ndarray           # kept correspondences, second-half side
    residuals: np.ndarray           # chord residuals of the kept pairs
    n_matched: int                  # first-half events with a non-empty gate
    trim_count: int
    degraded: bool                  # fewer matches than the requested count
    objective_path: np.ndarray      # trimmed objective after each iteration
    iterations: int
    converged: bool


def fit_rotation(src_rays, dst_rays):
    """Rotation minimising the summed squared chord distance dst - R @ src.

    Closed-form orthogonal fit: SVD of the correlation matrix with a
    determinant correction so the result is a proper rotation. Requires at
    least two pairs with non-collinear source rays.
    """
    src = np.asarray(src_rays, dtype=float)
    dst = np.asarray(dst_rays, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise InsufficientDataError("fit_rotation needs matching (n, 3) arrays")
    if src.shape[0] < 2:
        raise InsufficientDataError("rotation fit needs at least two ray pairs")
    B = dst.T @ src
    U, s, Vt = np.linalg.svd(B)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateGeometryError("ray pairs are collinear; rotation unconstrained")
    d = np.sign(np.linalg.det(U) * np.linalg.det(Vt))
    return (U * np.array([1.0, 1.0, d])) @ Vt


def smallest_k(values, k):
    """Indices of the k smallest values; ties resolve to the smallest index.

    Equivalent to a stable sort followed by [:k], but O(n).
    """
    values = np.asarray(values)
    n = values.size
    if k >= n:
        return np.arange(n, dtype=np.int64)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    part = np.argpartition(values, k - 1)[:k]
    thr = values[part].max()
    below = np.flatnonzero(values < thr)
    at = np.flatnonzero(values == thr)
    sel = np.concatenate((below, at[: k - below.size]))
    sel.sort()
    return sel.astype(np.int64)


def recover_velocity(rotation_half, t_start, t_end):
    """Angular velocity and full-window rotation from a half-window rotation.

    Constant velocity over the window means the full rotation is the half
    rotation applied twice, i.e. the exponential of twice its rotation
    vector.
    """
    if not t_end > t_start:
        raise InsufficientDataError("window must have positive duration")
    r = so3_log(rotation_half)
    omega = 2.0 * r / (t_end - t_start)
    return omega, so3_exp(2.0 * r)


class _GatedMatcher:
    """Temporal gates plus spatial search, fixed for one batch split.

    Gate membership depends only on timestamps, so the matched set is
    constant across solver iterations; only the assignment within each gate
    changes as the rotation is refined.
    """

    def __init__(self, batch, rays, config):
        m = batch.split_count()
        self.m = m
        self.src_rays = rays[:m]
        self.dst_rays = rays[m:]
        dst_rays = self.dst_rays
        eps = config.gate_width(batch.duration)
        delta = batch.half_duration
        self.groups = []
        if config.match_polarity:
            polarities = (1, -1)
        else:
            polarities = (None,)
        src_t = batch.t[:m]
        dst_t = batch.t[m:]
        dst_p = batch.p[m:]
        src_p = batch.p[:m]
        for pol in polarities:
            if pol is None:
                src_sel = np.arange(m, dtype=np.int64)
                dst_map = np.arange(len(dst_t), dtype=np.int64)
            else:
                src_sel = np.flatnonzero(src_p == pol)
                dst_map = np.flatnonzero(dst_p == pol)
            if src_sel.size == 0:
                continue
            gate = IntervalIndex(dst_t[dst_map], offset=delta, half_width=eps)
            lo, hi = gate.window_bounds(src_t[src_sel])
            search = WindowSearch(dst_rays[dst_map])
            self.groups.append((src_sel, dst_map, search, lo, hi))

    def matched_mask(self):
        mask = np.zeros(self.m, dtype=bool)
        for src_sel, _, _, lo, hi in self.groups:
            mask[src_sel] = hi > lo
        return mask

    def assign(self, rotation):
        """Nearest gated second-half event for every first-half event.

        Returns (dst local index or -1, chord residual) arrays of length m.
        """
        rotated = self.src_rays @ rotation.T
        idx = np.full(self.m, -1, dtype=np.int64)
        resid = np.full(self.m, np.inf)
        for src_sel, dst_map, search, lo, hi in self.groups:
            li, ld = search.query(lo, hi, rotated[src_sel])
            gi = np.full(li.size, -1, dtype=np.int64)
            hit = li >= 0
            gi[hit] = dst_map[li[hit]]
            idx[src_sel] = gi
            resid[src_sel] = ld
        return idx, resid


def match_events(batch, intrinsics, rotation, config=None, rays=None):
    """One assignment pass under a fixed rotation.

    Returns (src_index, dst_index, residuals) over the gated-and-matched
    first-half events, dst_index being global batch indices.
    """
    config = config or RegistrationConfig()
    if rays is None:
        rays = pixel_to_ray(batch.xy, intrinsics)
    matcher = _GatedMatcher(batch, rays, config)
    idx, resid = matcher.assign(np.asarray(rotation, dtype=float))
    src = np.flatnonzero(idx >= 0)
    return src, idx[src] + matcher.m, resid[src]


def solve(batch, intrinsics, config=None, rays=None):
    """Estimate the batch rotation by trimmed alternating registration.

    rays, when given, must be the precomputed unit rays of every event in
    the batch (callers that slide overlapping batches cache them).
    """
    config = config or RegistrationConfig()
    if rays is None:
        rays = pixel_to_ray(batch.xy, intrinsics)
    matcher = _GatedMatcher(batch, rays, config)
    m = matcher.m
    matched = np.flatnonzero(matcher.matched_mask())
    if matched.size < 2:
        raise InsufficientDataError(
            f"only {matched.size} events have gated neighbours"
        )
    if config.trim_count is not None:
        k = min(config.trim_count, matched.size)
        degraded = config.trim_count > matched.size
    else:
        k = math.floor(config.trim_fraction * matched.size)
        degraded = False
    k = max(k, 2)

    R = np.eye(3)
    idx, resid = matcher.assign(R)
    sel = matched[smallest_k(resid[matched], k)]
    objective = float(resid[sel].sum())
    path = [objective]
    iterations = 0
    converged = False
    for _ in range(config.max_iters):
        R_new = fit_rotation(matcher.src_rays[sel],
                             matcher.dst_rays[idx[sel]])
        idx_new, resid_new = matcher.assign(R_new)
        sel_new = matched[smallest_k(resid_new[matched], k)]
        objective_new = float(resid_new[sel_new].sum())
        if objective_new > objective:
            # the squared-fit step failed to lower the unsquared objective;
            # keep the previous state and stop
            converged = True
            break
        step = geodesic_angle(R_new, R)
        R, idx, resid = R_new, idx_new, resid_new
        sel, objective = sel_new, objective_new
        path.append(objective)
        iterations += 1
        if step < config.step_tol:
            converged = True
            break

    omega, rotation_full = recover_velocity(R, batch.t_start, batch.t_end)
    return RegistrationResult(
        rotation_half=R,
        rotation_full=rotation_full,
        omega=omega,
        window=(batch.t_start, batch.t_end),
        src_index=sel,
        dst_index=idx[sel] + m,
        residuals=resid[sel],
        n_matched=int(matched.size),
        trim_count=int(k),
        degraded=degraded,
        objective_path=np.asarray(path),
        iterations=iterations,
        converged=converged,
    )
