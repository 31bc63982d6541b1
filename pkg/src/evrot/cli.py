"""Command-line interface.

Four subcommands: per-batch velocity estimation over non-overlapping batches
(estimate), the odometry pipeline (vo), synthetic dataset generation (synth),
and the batch-size/method sweep (bench). Failures exit nonzero with a
machine-readable category prefix on stderr.
"""

import argparse
import sys
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from . import bench as bench_mod
from . import io as io_mod
from .errors import EvrotError
from .events import EventBatch
from .metrics import absolute_orientation_error
from .synth import (
    MotionScript,
    default_intrinsics,
    generate_stream,
    random_landmarks,
    wobble_script,
)
from .vo import VoConfig, vo_run


def _duration_batches(events, duration_s):
    """Consecutive fixed-duration windows; the trailing partial one is dropped."""
    t0 = float(events.t[0])
    n_full = int(np.floor((float(events.t[-1]) - t0) / duration_s))
    for k in range(n_full):
        lo, hi = t0 + k * duration_s, t0 + (k + 1) * duration_s
        i0, i1 = np.searchsorted(events.t, (lo, hi))
        yield EventBatch(events.t[i0:i1], events.xy[i0:i1], events.p[i0:i1],
                         (lo, hi), check=False)


def _cmd_estimate(args):
    events = io_mod.read_events(args.events)
    intr = io_mod.read_calibration(args.calib)
    batches = None
    if args.batch_duration is not None:
        batches = _duration_batches(events, args.batch_duration * 1e-3)
    rot, win, omegas, runtimes, extras = bench_mod.estimate_batches(
        events, intr, args.method, args.batch_size, batches=batches
    )
    with open(args.out, "w") as f:
        f.write("batch,t_start,t_end,n_events,omega_x,omega_y,omega_z,"
                "qx,qy,qz,qw,score,matched,kept,iterations,converged,"
                "runtime_ms\n")
        for i in range(len(win)):
            q = Rotation.from_matrix(rot[i] @ rot[i]).as_quat()
            e = extras[i]
            f.write("%d,%.9f,%.9f,%d,%.9g,%.9g,%.9g,%.17g,%.17g,%.17g,%.17g,"
                    "%.9g,%d,%d,%d,%d,%.3f\n"
                    % (i, win[i, 0], win[i, 1], e["n_events"],
                       omegas[i, 0], omegas[i, 1], omegas[i, 2],
                       q[0], q[1], q[2], q[3], e["score"], e["matched"],
                       e["kept"], e["iterations"], int(e["converged"]),
                       runtimes[i] * 1e3))
    print(f"estimated {len(win)} batches -> {args.out}")
    return 0


def _cmd_vo(args):
    events = io_mod.read_events(args.events)
    intr = io_mod.read_calibration(args.calib)
    config = VoConfig(batch_size=args.batch_size)
    result = vo_run(events, intr, config)
    trajectory = result.chained if args.no_averaging else result.averaged
    io_mod.write_trajectory_csv(args.out, trajectory)
    variant = "chained" if args.no_averaging else "averaged"
    print(f"{variant} trajectory: {len(result.node_times)} nodes, "
          f"{int(result.key_flags.sum())} key batches, "
          f"{len(result.skipped)} skipped, "
          f"{result.throughput:.0f} events/s -> {args.out}")
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.gt is not None:
        report = absolute_orientation_error(trajectory,
                                            io_mod.read_trajectory(args.gt))
        print(f"absolute orientation error (deg): mean {report.mean_deg:.4f}, "
              f"max {report.max_deg:.4f}, final {report.final_deg:.4f}")
    return 0


def _cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    intr = default_intrinsics()
    landmarks = random_landmarks(args.landmarks, intr, rng)
    if args.preset == "const":
        omega = np.asarray([float(v) for v in args.omega.split(",")])
        if omega.size != 3:
            raise EvrotError("--omega needs three comma-separated values")
        script = MotionScript.constant(omega, args.duration)
    else:
        script = wobble_script(rng, args.duration, magnitude=args.magnitude,
                               segment_duration=args.segment_duration)
    events, trajectory = generate_stream(
        landmarks, script, intr, rng, rate=args.rate, pair_dt=args.pair_dt,
        noise_px=args.noise_px, outlier_fraction=args.outlier_fraction,
        jitter_s=args.jitter_s, quantize=args.quantize,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io_mod.write_events(out / "events.txt", events)
    io_mod.write_calibration(out / "calib.txt", intr)
    io_mod.write_trajectory(out / "gt.txt", trajectory)
    print(f"{len(events)} events over {script.duration:.2f}s -> {out}")
    return 0


def _cmd_bench(args):
    events = io_mod.read_events(args.events)
    intr = io_mod.read_calibration(args.calib)
    trajectory = io_mod.read_trajectory(args.gt)
    sizes = [int(v) for v in args.batch_sizes.split(",")]
    methods = [m.strip() for m in args.methods.split(",")]
    for m in methods:
        if m not in bench_mod.METHODS:
            raise EvrotError(f"unknown method {m!r}")
    rows = bench_mod.run_bench(events, intr, trajectory, sizes, methods,
                               sequence=Path(args.events).stem,
                               max_batches=args.max_batches)
    bench_mod.write_bench_csv(args.out, rows)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="evrot",
        description="Rotational motion estimation from event streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate",
                       help="per-batch angular velocity, non-overlapping batches")
    p.add_argument("--events", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--method", choices=bench_mod.METHODS, default="str")
    p.add_argument("--batch-size", type=int, default=30000)
    p.add_argument("--batch-duration", type=float, default=None, metavar="MS",
                   help="slice by time instead of event count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("vo", help="batched visual odometry trajectory")
    p.add_argument("--events", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--gt", default=None)
    p.add_argument("--no-averaging", action="store_true",
                   help="emit the chained trajectory without averaging")
    p.add_argument("--batch-size", type=int, default=30000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_vo)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=("const", "script"), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--rate", type=float, default=100000.0)
    p.add_argument("--omega", default="0.0,0.0,0.4",
                   help="const preset velocity, rad/s")
    p.add_argument("--magnitude", type=float, default=0.4,
                   help="script preset wobble size, rad/s")
    p.add_argument("--segment-duration", type=float, default=1.0)
    p.add_argument("--landmarks", type=int, default=600)
    p.add_argument("--pair-dt", type=float, default=0.025)
    p.add_argument("--noise-px", type=float, default=0.0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--jitter-s", type=float, default=0.0)
    p.add_argument("--quantize", action="store_true")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="batch-size and method sweep")
    p.add_argument("--events", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--batch-sizes", default="10000,15000,20000,25000,30000")
    p.add_argument("--methods", default="str,cm")
    p.add_argument("--max-batches", type=int, default=None,
                   help="cap batches per combination")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EvrotError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
