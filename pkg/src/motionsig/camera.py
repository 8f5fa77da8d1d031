"""Pinhole cameras, depth lifting, world/camera transforms and retargeting.

Conventions: world-to-camera extrinsics ``p_cam = R @ p_world + t``; camera
axes +x right, +y down, +z forward.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from os import PathLike
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    CorruptFileError,
    FormatError,
    FrameCountMismatch,
    LiftError,
    ValidationError,
)
from .trajectory import PointTrajectorySet

ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"bad canvas {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} canvas")

    @property
    def canvas(self) -> Tuple[int, int]:
        """``(H, W)``"""
        return self.height, self.width

    def with_canvas(self, width: int, height: int) -> "CameraIntrinsics":
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy, width, height)


def check_rotation(R, tol: float = ORTHO_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValidationError(f"rotation must be 3x3, got {R.shape}")
    if np.abs(R.T @ R - np.eye(3)).max() > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValidationError("rotation is not orthonormal with det +1")
    return R


@dataclass(frozen=True, eq=False)
class CameraPose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = check_rotation(self.rotation).copy()
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True, eq=False)
class CameraTrajectory:
    intrinsics: Tuple[CameraIntrinsics, ...]
    poses: Tuple[CameraPose, ...]

    def __post_init__(self):
        intr, poses = tuple(self.intrinsics), tuple(self.poses)
        if len(intr) < 1 or len(intr) != len(poses):
            raise ValidationError(
                f"trajectory needs matching, non-empty intrinsics/poses ({len(intr)} vs {len(poses)})")
        if len({k.canvas for k in intr}) != 1:
            raise ValidationError("all frames must share the canvas size")
        object.__setattr__(self, "intrinsics", intr)
        object.__setattr__(self, "poses", poses)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def frame_count(self) -> int:
        return len(self.poses)

    @property
    def canvas(self) -> Tuple[int, int]:
        return self.intrinsics[0].canvas

    @property
    def rotations(self) -> np.ndarray:
        return np.stack([p.rotation for p in self.poses])

    @property
    def translations(self) -> np.ndarray:
        return np.stack([p.translation for p in self.poses])

    def with_canvas(self, width: int, height: int) -> "CameraTrajectory":
        return CameraTrajectory(tuple(k.with_canvas(width, height) for k in self.intrinsics), self.poses)


def round_half_away(x):
    """Round to the nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def project_points(points: np.ndarray, intr: CameraIntrinsics):
    """Vectorised pinhole projection.

    Returns ``(u, v, z, on_screen)``; ``u``/``v`` are int64 pixel indices
    (meaningless where ``on_screen`` is False).
    """
    p = np.asarray(points, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        uf = round_half_away(intr.fx * x / z + intr.cx)
        vf = round_half_away(intr.fy * y / z + intr.cy)
        ok = (z > 0) & (uf >= 0) & (uf < intr.width) & (vf >= 0) & (vf < intr.height)
    u = np.where(ok, uf, -1).astype(np.int64)
    v = np.where(ok, vf, -1).astype(np.int64)
    return u, v, z, ok


def project_2d(intr: CameraIntrinsics, point) -> Optional[Tuple[int, int, float]]:
    """Project one camera-space point; ``None`` means off-screen."""
    u, v, z, ok = project_points(np.asarray(point, dtype=np.float64).reshape(1, 3), intr)
    if not ok[0]:
        return None
    return int(u[0]), int(v[0]), float(z[0])


# ------------------------------------------------------------------ lifting

def lift_depth_map(depth: np.ndarray, intr: CameraIntrinsics, stride: int = 1) -> PointTrajectorySet:
    """Back-project every ``stride``-th pixel of a depth map (T = 1 set)."""
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ValidationError(f"depth map must be 2-D, got {d.shape}")
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    H, W = d.shape
    rows = np.arange(0, H, stride)
    cols = np.arange(0, W, stride)
    z = d[np.ix_(rows, cols)]
    bad = ~(np.isfinite(z) & (z > 0))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise LiftError(f"non-positive depth {z[r, c]} at pixel (u={cols[c]}, v={rows[r]})")
    uu, vv = np.meshgrid(cols.astype(np.float64), rows.astype(np.float64))
    pts = np.stack([(uu - intr.cx) * z / intr.fx, (vv - intr.cy) * z / intr.fy, z], axis=-1)
    N = pts.shape[0] * pts.shape[1]
    return PointTrajectorySet(pts.reshape(1, N, 3), np.ones((1, N), bool),
                              source_grid=(len(cols), len(rows)))


def _check_frames(traj: PointTrajectorySet, cams: CameraTrajectory):
    if traj.frame_count != cams.frame_count:
        raise FrameCountMismatch(traj.frame_count, cams.frame_count, "points and cameras")


def lift_to_world(traj: PointTrajectorySet, cams: CameraTrajectory) -> PointTrajectorySet:
    """Per-frame camera coordinates -> world coordinates ``R^T (p - t)``."""
    _check_frames(traj, cams)
    R, t = cams.rotations, cams.translations
    world = np.einsum("tji,tnj->tni", R, traj.positions - t[:, None, :])
    return traj.replace(positions=world)


def to_camera(world: PointTrajectorySet, cams: CameraTrajectory) -> np.ndarray:
    _check_frames(world, cams)
    R, t = cams.rotations, cams.translations
    return np.einsum("tij,tnj->tni", R, world.positions) + t[:, None, :]


def retarget(world: PointTrajectorySet, new_cams: CameraTrajectory) -> PointTrajectorySet:
    """Express world points in the new cameras; points behind a camera lose
    visibility for that frame."""
    cam = to_camera(world, new_cams)
    with np.errstate(invalid="ignore"):
        vis = world.visibility & (cam[..., 2] > 0)
    return world.replace(positions=cam, visibility=vis)


def broadcast_static(traj: PointTrajectorySet, frames: int) -> PointTrajectorySet:
    """Repeat a single-frame set over ``frames`` frames (static world)."""
    if traj.frame_count != 1:
        raise ValidationError("broadcast_static expects a single-frame set")
    return traj.replace(positions=np.repeat(traj.positions, frames, axis=0),
                        visibility=np.repeat(traj.visibility, frames, axis=0))


# ------------------------------------------------------ trajectory presets

def look_at(center, target=(0.0, 0.0, 0.0), down=(0.0, 1.0, 0.0)) -> CameraPose:
    """World-to-camera pose for a camera at ``center`` facing ``target``."""
    c = np.asarray(center, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - c
    fwd /= np.linalg.norm(fwd)
    right = np.cross(np.asarray(down, dtype=np.float64), fwd)
    right /= np.linalg.norm(right)
    dn = np.cross(fwd, right)
    R = np.stack([right, dn, fwd])
    return CameraPose(R, -R @ c)


def generate_trajectory(kind: str, frames: int, intr: CameraIntrinsics, *,
                        displacement: Sequence[float] = (0.0, 0.0, 0.0),
                        distance: float = 0.0, radius: float = 1.0,
                        arc_degrees: float = 30.0) -> CameraTrajectory:
    """Synthetic camera paths.

    ``static`` repeats the identity pose; ``pan`` moves the translation
    linearly to ``displacement`` at the last frame; ``dolly`` does the same
    along the optical axis by ``distance``; ``orbit`` sweeps ``arc_degrees``
    on a circle of ``radius`` about the vertical axis, always facing the
    world origin.
    """
    if frames < 1:
        raise ValidationError("frames must be >= 1")
    s = np.linspace(0.0, 1.0, frames) if frames > 1 else np.zeros(1)
    if kind == "static":
        poses = [CameraPose.identity() for _ in range(frames)]
    elif kind in ("pan", "dolly"):
        d = np.asarray(displacement, dtype=np.float64) if kind == "pan" else np.array([0.0, 0.0, distance])
        poses = [CameraPose(np.eye(3), si * d) for si in s]
    elif kind == "orbit":
        if not radius > 0:
            raise ValidationError("orbit radius must be positive")
        theta = np.deg2rad(arc_degrees) * s
        poses = [look_at((radius * math.sin(a), 0.0, -radius * math.cos(a))) for a in theta]
    else:
        raise ValidationError(f"unknown trajectory kind {kind!r}")
    return CameraTrajectory(tuple([intr] * frames), tuple(poses))


# ------------------------------------------------------------ FXPO / FXDM

def load_poses(path: str | PathLike, width: int, height: int) -> CameraTrajectory:
    """Parse an FXPO text file; ``width``/``height`` give the canvas."""
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            fields = s.split()
            if len(fields) != 17:
                raise FormatError(f"{path}:{lineno}: expected 17 fields, got {len(fields)}")
            try:
                idx = int(fields[0])
                vals = [float(x) for x in fields[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            rows.append((lineno, idx, vals))
    if not rows:
        raise FormatError(f"{path}: no pose lines")
    intr, poses = [], []
    for expect, (lineno, idx, vals) in enumerate(rows):
        if idx != expect:
            raise FormatError(f"{path}:{lineno}: frame index {idx}, expected {expect}")
        fx, fy, cx, cy = vals[:4]
        try:
            intr.append(CameraIntrinsics(fx, fy, cx, cy, width, height))
            poses.append(CameraPose(np.array(vals[4:13]).reshape(3, 3), vals[13:16]))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return CameraTrajectory(tuple(intr), tuple(poses))


def save_poses(cams: CameraTrajectory, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# frame fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n")
        for i, (k, p) in enumerate(zip(cams.intrinsics, cams.poses)):
            vals = [k.fx, k.fy, k.cx, k.cy, *p.rotation.ravel(), *p.translation]
            f.write(f"{i} " + " ".join(repr(float(v)) for v in vals) + "\n")


FXDM_MAGIC = b"FXDM"


def save_depth_map(depth: np.ndarray, path: str | PathLike) -> None:
    d = np.asarray(depth, dtype="<f4")
    H, W = d.shape
    with open(path, "wb") as f:
        f.write(FXDM_MAGIC + struct.pack("<III", 1, H, W) + d.tobytes())


def load_depth_map(path: str | PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 16 or buf[:4] != FXDM_MAGIC:
        raise FormatError(f"{path}: not an FXDM file")
    version, H, W = struct.unpack_from("<III", buf, 4)
    if version != 1:
        raise FormatError(f"{path}: unsupported FXDM version {version}")
    if len(buf) - 16 != H * W * 4:
        raise CorruptFileError(f"{path}: expected {H * W * 4} payload bytes, got {len(buf) - 16}")
    return np.frombuffer(buf, dtype="<f4", offset=16).reshape(H, W).astype(np.float64)
