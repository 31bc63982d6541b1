"""Round-trip the on-disk formats and run the benchmark harness.

Generates a short stream, writes it in the plain-text formats the tools
exchange (events "t x y p", calibration, ground-truth trajectory), reads
everything back, and produces a benchmark CSV comparing both estimators.
The same files drive the CLI:

    evrot synth --preset const --out-dir data/
    evrot bench --events data/events.txt --calib data/calib.txt \
        --gt data/gt.txt --out report.csv
"""

import tempfile
from pathlib import Path

import numpy as np

from evrot.bench import run_bench, write_bench_csv
from evrot.io import read_calibration, read_events, read_trajectory, \
    write_calibration, write_events, write_trajectory
from evrot.synth import MotionScript, default_intrinsics, generate_stream, \
    random_landmarks

intr = default_intrinsics()
rng = np.random.default_rng(12)

landmarks = random_landmarks(400, intr, rng)
script = MotionScript.constant([0.1, -0.05, 0.5], 1.2)
events, gt = generate_stream(landmarks, script, intr, rng, rate=5e4,
                             noise_px=0.5, quantize=True)

root = Path(tempfile.mkdtemp(prefix="evrot_demo_"))
write_events(root / "events.txt", events)
write_calibration(root / "calib.txt", intr)
write_trajectory(root / "gt.txt", gt)
for f in sorted(root.iterdir()):
    print(f"wrote {f} ({f.stat().st_size // 1024} KiB)")

# Everything reads back; the readers validate rather than repair.
events2 = read_events(root / "events.txt")
intr2 = read_calibration(root / "calib.txt")
gt2 = read_trajectory(root / "gt.txt")
assert len(events2) == len(events)
assert (intr2.width, intr2.height) == (intr.width, intr.height)
print(f"\nread back {len(events2)} events, {len(gt2)} ground-truth poses")

rows = run_bench(events2, intr2, gt2, batch_sizes=[10000, 20000],
                 methods=["str", "cm"])
out = root / "report.csv"
write_bench_csv(out, rows)
print(f"\nbenchmark report ({out}):")
print(out.read_text())
