import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from motionsig.camera import (
    CameraIntrinsics,
    CameraPose,
    CameraTrajectory,
    broadcast_static,
    generate_trajectory,
    lift_depth_map,
    lift_to_world,
    load_depth_map,
    load_poses,
    project_2d,
    project_points,
    retarget,
    save_depth_map,
    save_poses,
)
from motionsig.errors import CorruptFileError, FormatError, FrameCountMismatch, LiftError, ValidationError
from motionsig.trajectory import PointTrajectorySet

INTR = CameraIntrinsics(100, 100, 50, 50, 200, 100)


def random_cams(rng, T, intr=INTR):
    Rs = Rotation.random(T, random_state=rng.integers(1 << 31)).as_matrix()
    ts = rng.normal(size=(T, 3))
    return CameraTrajectory(tuple([intr] * T), tuple(CameraPose(R, t) for R, t in zip(Rs, ts)))


def test_intrinsics_validation():
    with pytest.raises(ValidationError):
        CameraIntrinsics(0, 1, 1, 1, 4, 4)
    with pytest.raises(ValidationError):
        CameraIntrinsics(1, 1, 4, 1, 4, 4)


def test_pose_validation():
    with pytest.raises(ValidationError):
        CameraPose(np.diag([1, 1, -1.0]), np.zeros(3))
    with pytest.raises(ValidationError):
        CameraPose(np.eye(3) * 1.01, np.zeros(3))


def test_lift_principal_point():
    intr = CameraIntrinsics(100, 100, 2, 1, 4, 3)
    traj = lift_depth_map(np.ones((3, 4)), intr)
    # pixel (u=2, v=1) -> index 1*4 + 2
    np.testing.assert_array_equal(traj.positions[0, 6], (0, 0, 1))
    assert traj.source_grid == (4, 3)


def test_lift_value():
    depth = np.full((100, 200), 2.0)
    traj = lift_depth_map(depth, INTR)
    np.testing.assert_allclose(traj.positions[0, 50 * 200 + 150], (2, 0, 2))


def test_lift_rejects_bad_depth():
    depth = np.ones((4, 4))
    depth[2, 3] = 0
    with pytest.raises(LiftError, match="u=3, v=2"):
        lift_depth_map(depth, CameraIntrinsics(1, 1, 1, 1, 4, 4))
    # stride may skip the bad pixel
    lift_depth_map(depth, CameraIntrinsics(1, 1, 1, 1, 4, 4), stride=2)


@pytest.mark.parametrize("stride", [1, 3, 7])
def test_lift_project_roundtrip(stride):
    rng = np.random.default_rng(stride)
    H, W = 60, 90
    intr = CameraIntrinsics(70.3, 64.1, 44.6, 29.2, W, H)
    depth = rng.uniform(0.1, 30, (H, W))
    traj = lift_depth_map(depth, intr, stride)
    u, v, _, ok = project_points(traj.positions[0], intr)
    assert ok.all()
    gw, gh = traj.source_grid
    np.testing.assert_array_equal(u, np.tile(np.arange(0, W, stride), gh))
    np.testing.assert_array_equal(v, np.repeat(np.arange(0, H, stride), gw))


def test_lift_to_world_identity_and_translation():
    traj = PointTrajectorySet([[[1, 2, 3]]], [[True]])
    ident = CameraTrajectory((INTR,), (CameraPose.identity(),))
    np.testing.assert_array_equal(lift_to_world(traj, ident).positions, traj.positions)
    shifted = CameraTrajectory((INTR,), (CameraPose(np.eye(3), (0, 0, -1)),))
    np.testing.assert_array_equal(lift_to_world(traj, shifted).positions, [[[1, 2, 4]]])


def test_lift_to_world_frame_mismatch():
    traj = PointTrajectorySet(np.ones((2, 1, 3)), np.ones((2, 1), bool))
    with pytest.raises(FrameCountMismatch):
        lift_to_world(traj, CameraTrajectory((INTR,), (CameraPose.identity(),)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_world_camera_roundtrip(seed):
    rng = np.random.default_rng(seed)
    T, N = 4, 20
    cams = random_cams(rng, T)
    pos = rng.normal(size=(T, N, 3)) + [0, 0, 5]
    traj = PointTrajectorySet(pos, np.ones((T, N), bool))
    back = retarget(lift_to_world(traj, cams), cams)
    assert np.abs(back.positions - pos).max() < 1e-9


def test_retarget_behind_camera_loses_visibility():
    world = PointTrajectorySet([[[0, 0, 1]], [[0, 0, 1]]], [[True], [True]])
    cams = CameraTrajectory((INTR, INTR), (CameraPose.identity(), CameraPose(np.eye(3), (0, 0, -2))))
    out = retarget(world, cams)
    assert out.visibility.tolist() == [[True], [False]]


def test_retarget_pan_shifts_u_monotonically():
    world = broadcast_static(lift_depth_map(np.full((10, 20), 4.0), CameraIntrinsics(50, 50, 10, 5, 20, 10)), 6)
    intr = CameraIntrinsics(50, 50, 10, 5, 20, 10)
    cams = generate_trajectory("pan", 6, intr, displacement=(0.5, 0, 0))
    out = retarget(world, cams)
    i = 5 * 20 + 10
    us = [fx for fx in (50 * out.positions[t, i, 0] / out.positions[t, i, 2] + 10 for t in range(6))]
    assert all(b > a for a, b in zip(us, us[1:]))
    # pinhole evaluation: u(t) = 10 + 50 * (0 + 0.5 t/5) / 4
    np.testing.assert_allclose(us, [10 + 50 * 0.1 * t / 4 for t in range(6)])


def test_generate_static_and_dolly():
    static = generate_trajectory("static", 5, INTR)
    assert len(static) == 5
    for p in static.poses:
        np.testing.assert_array_equal(p.rotation, np.eye(3))
        np.testing.assert_array_equal(p.translation, np.zeros(3))
    dolly = generate_trajectory("dolly", 3, INTR, distance=1.0)
    assert [p.translation[2] for p in dolly.poses] == [0, 0.5, 1]


def test_generate_orbit():
    orbit = generate_trajectory("orbit", 9, INTR, radius=2.5, arc_degrees=120)
    for p in orbit.poses:
        assert abs(np.linalg.norm(p.center) - 2.5) < 1e-9
        R = p.rotation
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(R) - 1) < 1e-9
        # origin is on the optical axis
        c = R @ np.zeros(3) + p.translation
        np.testing.assert_allclose(c[:2], 0, atol=1e-12)
        assert c[2] > 0


def test_generate_errors():
    with pytest.raises(ValidationError):
        generate_trajectory("spin", 3, INTR)
    with pytest.raises(ValidationError):
        generate_trajectory("orbit", 3, INTR, radius=0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_rigid_equivariance(seed):
    rng = np.random.default_rng(seed)
    T, N = 3, 30
    cams = random_cams(rng, T)
    world = np.stack([-(c.rotation.T @ c.translation) + c.rotation[2] * 5 for c in cams.poses])[:, None, :] \
        + rng.normal(scale=0.5, size=(T, N, 3))
    G_R = Rotation.random(random_state=rng.integers(1 << 31)).as_matrix()
    G_t = rng.normal(size=3) * 3
    moved_cams = CameraTrajectory(cams.intrinsics, tuple(
        CameraPose(p.rotation @ G_R.T, p.translation - p.rotation @ G_R.T @ G_t) for p in cams.poses))
    a = retarget(PointTrajectorySet(world, np.ones((T, N), bool)), cams).positions
    b = retarget(PointTrajectorySet(world @ G_R.T + G_t, np.ones((T, N), bool)), moved_cams).positions
    ua = INTR.fx * a[..., 0] / a[..., 2] + INTR.cx
    ub = INTR.fx * b[..., 0] / b[..., 2] + INTR.cx
    assert np.abs(ua - ub).max() < 0.5


# ----------------------------------------------------------------------- I/O

def test_pose_file_roundtrip(tmp_path):
    cams = random_cams(np.random.default_rng(0), 4)
    save_poses(cams, tmp_path / "p.fxpo")
    back = load_poses(tmp_path / "p.fxpo", INTR.width, INTR.height)
    np.testing.assert_array_equal(back.rotations, cams.rotations)
    np.testing.assert_array_equal(back.translations, cams.translations)
    assert back.intrinsics == cams.intrinsics


def test_pose_file_errors(tmp_path):
    p = tmp_path / "p.fxpo"
    p.write_text("# c\n1 1 1 0 0 1 0 0 0 1 0 0 0 1 0 0 0\n")
    with pytest.raises(FormatError, match="frame index"):
        load_poses(p, 4, 4)
    p.write_text("0 1 1 0 0 1 0 0\n")
    with pytest.raises(FormatError):
        load_poses(p, 4, 4)
    p.write_text("0 1 1 0 0 2 0 0 0 1 0 0 0 1 0 0 0\n")
    with pytest.raises(ValidationError):
        load_poses(p, 4, 4)


def test_depth_file_roundtrip(tmp_path):
    d = np.arange(12, dtype=np.float32).reshape(3, 4) + 1
    save_depth_map(d, tmp_path / "d.fxdm")
    np.testing.assert_array_equal(load_depth_map(tmp_path / "d.fxdm"), d)
    blob = (tmp_path / "d.fxdm").read_bytes()
    (tmp_path / "bad.fxdm").write_bytes(blob[:-4])
    with pytest.raises(CorruptFileError):
        load_depth_map(tmp_path / "bad.fxdm")
    (tmp_path / "bad2.fxdm").write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        load_depth_map(tmp_path / "bad2.fxdm")


def test_project_2d_on_lifted_pixel():
    intr = CameraIntrinsics(100, 100, 50, 50, 200, 100)
    p = lift_depth_map(np.full((100, 200), 2.0), intr).positions[0, 50 * 200 + 150]
    assert project_2d(intr, p) == (150, 50, 2.0)
