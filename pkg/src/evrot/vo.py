"""Batched rotational visual odometry.

The stream is cut into overlapping batches (stride half a batch). Each batch
is registered; the kept correspondences extend feature tracks into the next
batch, which is then solved on the reduced set of tracked events plus the
fresh half. When too few tracks survive, the next batch becomes a key batch:
it is solved in full, the tracker restarts, and the nodes accumulated since
the previous key batch are flushed through pose-graph rotation averaging.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import pixel_to_ray
from .errors import (
    DegenerateGeometryError,
    EvrotError,
    InsufficientDataError,
)
from .events import EventBatch
from .geometry import relative_rotation, so3_exp, so3_log
from .io import Trajectory
from .registration import RegistrationConfig, fit_rotation, smallest_k, solve


@dataclass(frozen=True)
class VoConfig:
    """Pipeline parameters.

    key_threshold is strict: a batch runs as a key batch when the surviving
    track count falls below it. Key batches keep key_trim_fraction of the
    full batch; continuation batches keep track_trim_fraction of the
    surviving tracked events.
    """

    batch_size: int = 30000
    key_threshold: int = 2000
    key_trim_fraction: float = 0.4
    track_trim_fraction: float = 0.8
    registration: RegistrationConfig = field(default_factory=RegistrationConfig)
    min_shared_tracks: int = 2
    edge_weighting: bool = False   # weight pose-graph edges by shared-track count
    edge_trim_fraction: float = 0.8
    max_edge_pairs: int = 2048     # evenly strided cap on rays per edge fit
    huber_scale: float = 0.05      # rad
    averaging_iters: int = 50
    averaging_tol: float = 1e-8
    record_tracks: bool = False

    def __post_init__(self):
        if self.batch_size < 4 or self.batch_size % 2:
            raise ValueError("batch_size must be even and at least 4")
        if not self.key_threshold < self.key_trim_fraction * self.batch_size:
            raise ValueError("key_threshold must be below the key-batch keep count")


@dataclass
class FeatureTrack:
    """One tracked event chain across consecutive overlapping batches."""

    events: np.ndarray      # global stream indices, strictly increasing in time
    birth_batch: int
    last_batch: int

    def __len__(self):
        return len(self.events)


@dataclass
class VoResult:
    averaged: Trajectory            # rotation-averaged orientations at node times
    chained: Trajectory             # velocity-integrated orientations, no averaging
    node_times: np.ndarray          # one per solved batch, the window end
    node_batches: np.ndarray        # stream batch index of each node
    key_flags: np.ndarray           # True where the node was a key batch
    omegas: np.ndarray              # per-node angular velocity estimates
    track_counts: np.ndarray        # tracks surviving into the overlap, per node
    skipped: list                   # (batch index, reason) for failed batches
    warnings: list
    n_events: int                   # events consumed from the stream
    runtime_s: float                # wall time of the processing loop
    tracks: list | None = None      # FeatureTrack records when requested

    @property
    def throughput(self):
        """Events consumed per second of processing."""
        return self.n_events / self.runtime_s if self.runtime_s > 0 else 0.0


def batch_starts(n_events, batch_size):
    """Start indices of overlapping batches with stride half a batch."""
    if batch_size < 2 or batch_size % 2:
        raise ValueError("batch_size must be even and positive")
    if n_events < batch_size:
        return np.empty(0, dtype=np.int64)
    return np.arange(0, n_events - batch_size + 1, batch_size // 2,
                     dtype=np.int64)


def stream_batches(events, batch_size):
    """Yield consecutive overlapping batches of exactly batch_size events.

    Batch i covers stream indices [i*batch_size/2, i*batch_size/2 + batch_size)
    as a view, with the window declared from its first and last timestamps.
    A stream shorter than one batch yields nothing.
    """
    for s in batch_starts(len(events), batch_size):
        stop = s + batch_size
        yield EventBatch(events.t[s:stop], events.xy[s:stop], events.p[s:stop],
                         (events.t[s], events.t[stop - 1]), check=False)


def key_batch_decision(surviving, threshold):
    """True when too few tracks survive: the next solve must restart."""
    return surviving < threshold


def extend_tracks(kept_dst, kept_tids, overlap_start, new_half):
    """Carry tracks into the next batch and assemble its reduced event set.

    kept_dst: ascending global indices of the previous batch's correspondence
    targets, one per track. Targets below overlap_start fall outside the next
    batch and their tracks end. Returns (reduced batch indices, surviving
    target indices, their track ids); the reduced batch is the survivors plus
    the fresh half, and stays sorted because survivors precede new_half.
    """
    keep = kept_dst >= overlap_start
    survivors = kept_dst[keep]
    reduced = np.concatenate((survivors, new_half))
    return reduced, survivors, kept_tids[keep]


def estimate_pairwise(rays_u, rays_v, trim_fraction=0.8, max_rounds=5):
    """Relative rotation between two nodes from their shared-track rays.

    Trimmed orthogonal fit: alternate a full fit with re-selection of the
    best-fitting fraction of ray pairs until the kept set stabilises.
    Returns R with rays_v ~ R @ rays_u.
    """
    src = np.asarray(rays_u, dtype=float)
    dst = np.asarray(rays_v, dtype=float)
    if src.shape[0] < 2:
        raise InsufficientDataError("pairwise fit needs at least two shared tracks")
    k = max(int(trim_fraction * src.shape[0]), 2)
    sel = np.arange(src.shape[0])
    R = fit_rotation(src, dst)
    for _ in range(max_rounds):
        resid = np.linalg.norm(dst - src @ R.T, axis=1)
        new_sel = smallest_k(resid, k)
        if np.array_equal(new_sel, sel):
            break
        sel = new_sel
        R = fit_rotation(src[sel], dst[sel])
    return R


def rotation_averaging(n_nodes, edges, initial, anchors=None, huber_scale=0.05,
                       max_iters=50, tol=1e-8):
    """Robust absolute orientations from relative-rotation edges.

    edges: (u, v, R_uv, weight) tuples with R_uv mapping node u's frame to
    node v's. initial: (n, 3, 3) starting orientations; anchored nodes keep
    theirs (default anchor: node 0).

    Iteratively reweighted least squares on the geodesic residuals with a
    Huber weight: each sweep linearises every edge residual in the tangent
    space and solves one weighted graph Laplacian system per axis. Components
    not reaching an anchor are averaged about their lowest-index node's
    initial value and reported in the returned warning list.
    """
    R = np.array(initial, dtype=float, copy=True)
    if anchors is None:
        anchors = [0]
    anchored = np.zeros(n_nodes, dtype=bool)
    anchored[list(anchors)] = True
    warn = []

    adj = [[] for _ in range(n_nodes)]
    for u, v, _, _ in edges:
        adj[u].append(v)
        adj[v].append(u)
    comp = np.full(n_nodes, -1, dtype=np.int64)
    n_comp = 0
    for start in range(n_nodes):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = n_comp
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = n_comp
                    stack.append(v)
        n_comp += 1
    for c in range(n_comp):
        members = np.flatnonzero(comp == c)
        if not anchored[members].any():
            anchored[members[0]] = True
            warn.append(
                f"pose graph component {sorted(members.tolist())} is not "
                "connected to an anchor; pinned to its chained estimate"
            )

    free = np.flatnonzero(~anchored)
    if free.size == 0 or not edges:
        return R, warn
    col = np.full(n_nodes, -1, dtype=np.int64)
    col[free] = np.arange(free.size)

    for _ in range(max_iters):
        L = np.zeros((free.size, free.size))
        b = np.zeros((free.size, 3))
        for u, v, R_uv, weight in edges:
            # residual in node v's frame; zero when R_v == R_uv @ R_u
            d = so3_log(R[v].T @ R_uv @ R[u])
            r = float(np.linalg.norm(d))
            w = weight if r <= huber_scale else weight * huber_scale / r
            cu, cv = col[u], col[v]
            if cu >= 0:
                L[cu, cu] += w
                b[cu] -= w * d
            if cv >= 0:
                L[cv, cv] += w
                b[cv] += w * d
            if cu >= 0 and cv >= 0:
                L[cu, cv] -= w
                L[cv, cu] -= w
        delta = np.linalg.solve(L, b)
        for i, u in enumerate(free):
            R[u] = R[u] @ so3_exp(delta[i])
        if np.abs(delta).max() < tol:
            break
    return R, warn


class _TrackStore:
    """Per-node track observations, kept only until the segment is flushed."""

    def __init__(self):
        self.tids = []      # per node: sorted track ids
        self.rays = []      # per node: matching observed rays

    def __len__(self):
        return len(self.tids)

    def add(self, tids, rays):
        order = np.argsort(tids, kind="stable")
        self.tids.append(tids[order])
        self.rays.append(rays[order])

    def clear(self):
        self.tids.clear()
        self.rays.clear()

    def shared_ray_pairs(self, i, j):
        common, iu, iv = np.intersect1d(
            self.tids[i], self.tids[j], assume_unique=True, return_indices=True
        )
        return common.size, self.rays[i][iu], self.rays[j][iv]


def _segment_edges(store, config):
    edges = []
    for i in range(len(store)):
        for j in range(i + 1, len(store)):
            count, ru, rv = store.shared_ray_pairs(i, j)
            if count < config.min_shared_tracks:
                continue
            if count > config.max_edge_pairs:
                pick = np.linspace(0, count - 1, config.max_edge_pairs,
                                   dtype=np.int64)
                ru, rv = ru[pick], rv[pick]
            try:
                R_uv = estimate_pairwise(ru, rv,
                                         trim_fraction=config.edge_trim_fraction)
            except (DegenerateGeometryError, InsufficientDataError):
                continue
            weight = float(count) if config.edge_weighting else 1.0
            edges.append((i, j, R_uv, weight))
    return edges


def vo_run(events, intrinsics, config=None):
    """Run the full odometry pipeline over an event stream.

    Returns a VoResult holding both the rotation-averaged trajectory and the
    chained (velocity integration only) one. Batches whose solve fails are
    skipped and force the next batch to be a key batch.
    """
    config = config or VoConfig()
    n = config.batch_size
    half = n // 2
    starts = batch_starts(len(events), n)
    if starts.size == 0:
        raise InsufficientDataError(
            f"stream has {len(events)} events, need at least {n}"
        )
    t_begin = time.perf_counter()
    rays_all = pixel_to_ray(events.xy, intrinsics)

    node_times = []
    node_batches = []
    key_flags = []
    omegas_list = []
    track_counts = []
    chained_list = []      # orientation per node by velocity integration
    averaged_list = []     # refined orientations, appended at segment flush
    skipped = []
    warn_list = []
    tracks = [] if config.record_tracks else None

    store = _TrackStore()
    gauge = None           # maps chained orientations into the averaged frame

    frontier_idx = np.empty(0, dtype=np.int64)
    frontier_tid = np.empty(0, dtype=np.int64)
    next_tid = 0
    force_key = True
    prev_beta = None
    prev_chained = np.eye(3)

    def flush_segment():
        nonlocal gauge
        if not len(store):
            return
        chained_seg = np.stack(chained_list[len(chained_list) - len(store):])
        if gauge is None:
            # first segment: its first node is pinned at the identity
            gauge = chained_seg[0].T
        initial = gauge @ chained_seg
        edges = _segment_edges(store, config)
        refined, warn = rotation_averaging(
            len(store), edges, initial, anchors=[0],
            huber_scale=config.huber_scale, max_iters=config.averaging_iters,
            tol=config.averaging_tol,
        )
        warn_list.extend(warn)
        averaged_list.extend(refined)
        # later segments continue from here: the correction that carries the
        # last chained value onto its refined one is applied to the whole
        # next segment, so orientation stays continuous across the boundary
        gauge = refined[-1] @ chained_seg[-1].T
        store.clear()

    for b, s in enumerate(starts):
        is_key = force_key or key_batch_decision(frontier_idx.size,
                                                 config.key_threshold)
        window = (float(events.t[s]), float(events.t[s + n - 1]))
        new_half = np.arange(s + half, s + n, dtype=np.int64)
        if is_key:
            sel = np.arange(s, s + n, dtype=np.int64)
            trim = int(config.key_trim_fraction * n)
        else:
            sel, _, _ = extend_tracks(frontier_idx, frontier_tid, s, new_half)
            trim = max(int(config.track_trim_fraction * frontier_idx.size), 2)
        batch = EventBatch(events.t[sel], events.xy[sel], events.p[sel],
                           window, check=False)
        reg = replace(config.registration, trim_count=trim)
        try:
            result = solve(batch, intrinsics, reg, rays=rays_all[sel])
        except EvrotError as exc:
            skipped.append((b, f"{exc.category}: {exc}"))
            flush_segment()
            frontier_idx = np.empty(0, dtype=np.int64)
            frontier_tid = np.empty(0, dtype=np.int64)
            force_key = True
            continue

        g_src = sel[result.src_index]
        g_dst = sel[result.dst_index]
        # one observation per track: nearest-neighbour assignment is
        # many-to-one, so deduplicate targets (first source wins)
        g_dst, first = np.unique(g_dst, return_index=True)
        g_src = g_src[first]

        if is_key:
            tids = np.arange(next_tid, next_tid + g_src.size, dtype=np.int64)
            next_tid += g_src.size
            if tracks is not None:
                tracks.extend(FeatureTrack([int(a), int(z)], b, b)
                              for a, z in zip(g_src, g_dst))
            force_key = False
        else:
            tids = np.empty(g_src.size, dtype=np.int64)
            if frontier_idx.size:
                pos = np.minimum(np.searchsorted(frontier_idx, g_src),
                                 frontier_idx.size - 1)
                on_track = frontier_idx[pos] == g_src
                tids[on_track] = frontier_tid[pos[on_track]]
            else:
                on_track = np.zeros(g_src.size, dtype=bool)
            fresh = np.flatnonzero(~on_track)
            tids[fresh] = np.arange(next_tid, next_tid + fresh.size)
            next_tid += fresh.size
            if tracks is not None:
                for i in np.flatnonzero(on_track):
                    tr = tracks[tids[i]]
                    tr.events.append(int(g_dst[i]))
                    tr.last_batch = b
                tracks.extend(FeatureTrack([int(g_src[i]), int(g_dst[i])], b, b)
                              for i in fresh)

        if is_key:
            flush_segment()

        node_batches.append(b)
        node_times.append(window[1])
        key_flags.append(is_key)
        omegas_list.append(result.omega)

        # chain from the previous node (or the stream start) with this
        # batch's velocity held across the actual time gap
        if prev_beta is None:
            R_c = relative_rotation(result.omega, window[1] - window[0])
        else:
            R_c = relative_rotation(result.omega, window[1] - prev_beta) \
                @ prev_chained
        chained_list.append(R_c)
        prev_beta = window[1]
        prev_chained = R_c

        store.add(tids, rays_all[g_dst])
        _, frontier_idx, frontier_tid = extend_tracks(g_dst, tids, s + half,
                                                      new_half[:0])
        track_counts.append(int(frontier_idx.size))

    flush_segment()
    runtime = time.perf_counter() - t_begin

    if not node_batches:
        raise InsufficientDataError("every batch failed to register")
    node_times = np.asarray(node_times)
    if tracks is not None:
        for tr in tracks:
            tr.events = np.asarray(tr.events, dtype=np.int64)
    return VoResult(
        averaged=Trajectory.from_matrices(node_times, np.stack(averaged_list)),
        chained=Trajectory.from_matrices(node_times, np.stack(chained_list)),
        node_times=node_times,
        node_batches=np.asarray(node_batches, dtype=np.int64),
        key_flags=np.asarray(key_flags, dtype=bool),
        omegas=np.stack(omegas_list),
        track_counts=np.asarray(track_counts, dtype=np.int64),
        skipped=skipped,
        warnings=warn_list,
        n_events=int(starts[-1] + n),
        runtime_s=runtime,
        tracks=tracks,
    )
