"""Benchmark harness: method and batch-size sweeps on one sequence.

Batches here are non-overlapping consecutive slices of the stream, the
protocol under which per-batch velocity accuracy is scored. Each row of the
sweep reports the RMS angular-velocity error under both normalisations (the
half-window one is the headline metric) and the mean solve time per batch.
"""

import time
from dataclasses import dataclass

import numpy as np

from .contrast import CmConfig, cm_solve
from .errors import InsufficientDataError
from .events import EventBatch
from .geometry import relative_rotation
from .metrics import rms_velocity_error
from .registration import RegistrationConfig, solve

METHODS = ("str", "cm")
DEFAULT_BATCH_SIZES = (10000, 15000, 20000, 25000, 30000)


@dataclass
class BenchRow:
    sequence: str
    batch_size: int
    duration_ms: float      # mean batch duration
    method: str
    rms_half_deg_s: float   # error over the half window, divided by delta
    rms_full_deg_s: float   # error over the full window, divided by its length
    mean_runtime_ms: float


def consecutive_batches(events, batch_size):
    """Non-overlapping N-event slices; a trailing partial slice is dropped."""
    if batch_size < 2:
        raise ValueError("batch_size must be at least 2")
    n = (len(events) // batch_size) * batch_size
    for s in range(0, n, batch_size):
        stop = s + batch_size
        yield EventBatch(events.t[s:stop], events.xy[s:stop], events.p[s:stop],
                         (events.t[s], events.t[stop - 1]), check=False)


def estimate_batches(events, intrinsics, method, batch_size,
                     reg_config=None, cm_config=None, max_batches=None,
                     batches=None):
    """Run one method over consecutive batches.

    Returns (rotations_half, windows, omegas, runtimes_s, extras): per-batch
    half-window rotations, batch spans, velocity estimates, solve times, and
    a list of per-batch detail dicts. The contrast method warm-starts each
    batch from the previous velocity. Batches that fail to solve are skipped.
    An explicit ``batches`` iterable overrides the count-based slicing.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if batches is None:
        batches = consecutive_batches(events, batch_size)
    rotations, windows, omegas, runtimes, extras = [], [], [], [], []
    prev_omega = np.zeros(3)
    for batch in batches:
        if max_batches is not None and len(windows) >= max_batches:
            break
        t0 = time.perf_counter()
        try:
            if method == "str":
                r = solve(batch, intrinsics, reg_config)
                detail = {"n_events": len(batch),
                          "score": float(r.objective_path[-1]),
                          "matched": int(r.n_matched), "kept": int(r.trim_count),
                          "iterations": int(r.iterations),
                          "converged": bool(r.converged)}
                omega, rot_half = r.omega, r.rotation_half
            else:
                r = cm_solve(batch, intrinsics, cm_config, omega0=prev_omega)
                detail = {"n_events": len(batch),
                          "score": float(r.contrast), "matched": 0, "kept": 0,
                          "iterations": int(r.iterations),
                          "converged": bool(r.converged)}
                omega = r.omega
                rot_half = relative_rotation(omega, batch.half_duration)
        except InsufficientDataError:
            continue
        runtimes.append(time.perf_counter() - t0)
        rotations.append(rot_half)
        windows.append((batch.t_start, batch.t_end))
        omegas.append(omega)
        extras.append(detail)
        prev_omega = omega
    if not windows:
        raise InsufficientDataError("no batch could be estimated")
    return (np.stack(rotations), np.asarray(windows), np.stack(omegas),
            np.asarray(runtimes), extras)


def run_bench(events, intrinsics, trajectory, batch_sizes=None, methods=None,
              sequence="events", max_batches=None):
    """Sweep batch sizes and methods; one BenchRow per combination.

    Rows come out in sweep order (sizes outer, methods inner), so the CSV is
    deterministic for a fixed input.
    """
    batch_sizes = list(batch_sizes or DEFAULT_BATCH_SIZES)
    methods = list(methods or METHODS)
    rows = []
    for size in batch_sizes:
        for method in methods:
            rot, win, _, runtimes, _ = estimate_batches(
                events, intrinsics, method, size, max_batches=max_batches
            )
            rows.append(BenchRow(
                sequence=sequence,
                batch_size=size,
                duration_ms=float(np.mean(win[:, 1] - win[:, 0]) * 1e3),
                method=method,
                rms_half_deg_s=rms_velocity_error(rot, win, trajectory, "half"),
                rms_full_deg_s=rms_velocity_error(rot, win, trajectory, "full"),
                mean_runtime_ms=float(runtimes.mean() * 1e3),
            ))
    return rows


def write_bench_csv(path, rows):
    with open(path, "w") as f:
        f.write("sequence,batch_size,duration_ms,method,"
                "rms_half_deg_s,rms_full_deg_s,mean_runtime_ms\n")
        for r in rows:
            f.write(f"{r.sequence},{r.batch_size},{r.duration_ms:.3f},"
                    f"{r.method},{r.rms_half_deg_s:.6f},{r.rms_full_deg_s:.6f},"
                    f"{r.mean_runtime_ms:.3f}\n")
