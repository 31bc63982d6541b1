import numpy as np
import pytest

from evrot.camera import CameraIntrinsics
from evrot.errors import DataFormatError, InsufficientDataError
from evrot.events import EventArray
from evrot.geometry import geodesic_angle, so3_exp
from evrot.io import (
    Trajectory,
    read_calibration,
    read_events,
    read_trajectory,
    write_calibration,
    write_events,
    write_trajectory,
    write_trajectory_csv,
)


def random_events(rng, n=500):
    t = np.sort(rng.uniform(0.0, 2.0, size=n))
    xy = rng.uniform(0.0, 345.0, size=(n, 2))
    p = rng.choice([-1, 1], size=n).astype(np.int8)
    return EventArray(t, xy, p)


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


def test_events_round_trip_bitwise(tmp_path, rng):
    events = random_events(rng)
    path = tmp_path / "ev.txt"
    write_events(path, events)
    back = read_events(path)
    assert np.array_equal(back.t, events.t)
    assert np.array_equal(back.xy, events.xy)
    assert np.array_equal(back.p, events.p)


def test_events_polarity_mapping(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("0.0 1.0 2.0 0\n0.5 3.0 4.0 1\n")
    back = read_events(path)
    assert back.p.tolist() == [-1, 1]


def test_events_comments_and_blank_lines(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("# header\n\n0.0 1.0 2.0 1\n# trailing\n0.5 3.0 4.0 0\n")
    assert len(read_events(path)) == 2


def test_events_empty_file(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("# nothing here\n")
    assert len(read_events(path)) == 0


def test_events_wrong_column_count(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("0.0 1.0 2.0\n")
    with pytest.raises(DataFormatError, match="columns"):
        read_events(path)


def test_events_unparseable_token_names_line(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("0.0 1.0 2.0 1\n0.5 oops 4.0 0\n")
    with pytest.raises(DataFormatError, match="line 2"):
        read_events(path)


def test_events_decreasing_time_names_record(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("0.5 1.0 2.0 1\n0.4 3.0 4.0 0\n")
    with pytest.raises(DataFormatError, match="record 2"):
        read_events(path)


def test_events_bad_polarity_value(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("0.0 1.0 2.0 2\n")
    with pytest.raises(DataFormatError, match="polarity"):
        read_events(path)


def test_events_non_finite_rejected(tmp_path):
    path = tmp_path / "ev.txt"
    path.write_text("0.0 nan 2.0 1\n")
    with pytest.raises(DataFormatError, match="non-finite"):
        read_events(path)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def test_calibration_round_trip(tmp_path):
    intr = CameraIntrinsics(fx=199.1, fy=198.7, cx=172.3, cy=130.1,
                            k1=-0.271, k2=0.087, width=346, height=260)
    path = tmp_path / "calib.txt"
    write_calibration(path, intr)
    assert read_calibration(path) == intr


def test_calibration_rejects_multiple_records(tmp_path):
    path = tmp_path / "calib.txt"
    line = "200 200 160 120 0 0 320 240\n"
    path.write_text(line + line)
    with pytest.raises(DataFormatError, match="one record"):
        read_calibration(path)


def test_calibration_rejects_bad_values(tmp_path):
    path = tmp_path / "calib.txt"
    path.write_text("-200 200 160 120 0 0 320 240\n")
    with pytest.raises(DataFormatError, match="focal"):
        read_calibration(path)
    path.write_text("200 200 160 120 0 0 320.5 240\n")
    with pytest.raises(DataFormatError, match="size"):
        read_calibration(path)


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------


def hand_slerp(q0, q1, u):
    """Textbook spherical interpolation, scalar-last, independent oracle."""
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1, dot = -q1, -dot
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    if theta < 1e-12:
        q = (1.0 - u) * q0 + u * q1
        return q / np.linalg.norm(q)
    return (np.sin((1.0 - u) * theta) * q0 + np.sin(u * theta) * q1) / np.sin(theta)


def quat_to_matrix(q):
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def test_trajectory_round_trip(tmp_path, rng):
    times = np.sort(rng.uniform(0.0, 5.0, size=40))
    quats = rng.normal(size=(40, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    traj = Trajectory(times, quats)
    path = tmp_path / "traj.txt"
    write_trajectory(path, traj)
    back = read_trajectory(path)
    assert np.array_equal(back.times, traj.times)
    # reading renormalizes, which can move the last ulp
    np.testing.assert_allclose(back.quats, traj.quats, atol=1e-15)


def test_trajectory_interpolation_matches_hand_slerp(rng):
    for _ in range(10):
        quats = rng.normal(size=(2, 4))
        quats /= np.linalg.norm(quats, axis=1, keepdims=True)
        traj = Trajectory([0.0, 1.0], quats)
        u = rng.uniform(0.0, 1.0)
        expected = quat_to_matrix(hand_slerp(quats[0], quats[1], u))
        got = traj.orientation_at(u)
        assert geodesic_angle(got, expected) < 1e-10


def test_trajectory_midpoint_of_quarter_turn():
    # 90 degree turn about z; halfway must be exactly 45 degrees
    traj = Trajectory.from_matrices(
        [0.0, 1.0], np.stack([np.eye(3), so3_exp(np.array([0.0, 0.0, np.pi / 2]))])
    )
    expected = so3_exp(np.array([0.0, 0.0, np.pi / 4]))
    assert geodesic_angle(traj.orientation_at(0.5), expected) < 1e-12


def test_trajectory_hits_knots_exactly(rng):
    times = np.array([0.0, 0.3, 1.1])
    quats = rng.normal(size=(3, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    traj = Trajectory(times, quats)
    mats = traj.matrices()
    for i, t in enumerate(times):
        assert geodesic_angle(traj.orientation_at(t), mats[i]) < 1e-12


def test_trajectory_relative_rotation():
    R1 = so3_exp(np.array([0.1, -0.2, 0.3]))
    R2 = so3_exp(np.array([-0.4, 0.5, 0.1]))
    traj = Trajectory.from_matrices([0.0, 1.0], np.stack([R1, R2]))
    rel = traj.relative_rotation(0.0, 1.0)
    assert geodesic_angle(rel @ R1, R2) < 1e-12


def test_trajectory_renormalizes_within_tolerance():
    q = np.array([[0.0, 0.0, 0.0, 1.0 + 5e-4]])
    traj = Trajectory([0.0], q)
    assert np.linalg.norm(traj.quats[0]) == pytest.approx(1.0, abs=1e-15)


def test_trajectory_rejects_far_from_unit():
    with pytest.raises(DataFormatError, match="unit"):
        Trajectory([0.0], np.array([[0.0, 0.0, 0.0, 1.01]]))


def test_trajectory_rejects_non_increasing_times():
    q = np.array([[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 1.0]])
    with pytest.raises(DataFormatError, match="increasing"):
        Trajectory([0.0, 0.0], q)


def test_trajectory_out_of_span_query():
    traj = Trajectory([0.0, 1.0], np.array([[0, 0, 0, 1], [0, 0, 0, 1]], dtype=float))
    with pytest.raises(InsufficientDataError, match="span"):
        traj.orientation_at(1.5)


def test_trajectory_csv_format(tmp_path):
    traj = Trajectory.from_matrices(
        [0.0, 0.5], np.stack([np.eye(3), so3_exp(np.array([0.0, 0.0, 1.0]))])
    )
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, traj)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,qx,qy,qz,qw"
    assert len(lines) == 3
    fields = lines[1].split(",")
    assert len(fields) == 5
    q = np.array([float(v) for v in fields[1:]])
    assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)


def test_trajectory_single_record(tmp_path):
    traj = Trajectory([0.5], np.array([[0.0, 0.0, 0.0, 1.0]]))
    np.testing.assert_array_equal(traj.orientation_at(0.5), np.eye(3))
