"""Spatial object editing: point selection by region, rigid per-frame
schedules, edit masks and the gray-filled appearance condition."""
from __future__ import annotations

from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import binary_dilation
from scipy.spatial.transform import Rotation, Slerp

from .camera import CameraIntrinsics, check_rotation, project_points
from .errors import EmptySelectionError, FormatError, InputError, ValidationError
from .trajectory import PointTrajectorySet

GRAY = 127
DEFAULT_DILATION = 4


@dataclass(frozen=True, eq=False)
class RigidSchedule:
    """Per-frame rigid motions ``(R_t, tau_t)``; frame 0 must be identity."""

    rotations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotations, dtype=np.float64)
        t = np.array(self.translations, dtype=np.float64)
        if R.ndim != 3 or R.shape[1:] != (3, 3) or t.shape != (len(R), 3) or len(R) < 1:
            raise ValidationError(f"schedule needs (T,3,3) rotations and (T,3) translations, "
                                  f"got {R.shape} and {t.shape}")
        for i, r in enumerate(R):
            try:
                check_rotation(r)
            except ValidationError:
                raise ValidationError(f"schedule rotation at frame {i} is not orthonormal") from None
        if np.abs(R[0] - np.eye(3)).max() > 1e-9 or np.abs(t[0]).max() > 1e-9:
            raise ValidationError("schedule frame 0 must be the identity transform")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotations", R)
        object.__setattr__(self, "translations", t)

    def __len__(self):
        return len(self.rotations)

    @classmethod
    def identity(cls, frames: int) -> "RigidSchedule":
        return cls(np.tile(np.eye(3), (frames, 1, 1)), np.zeros((frames, 3)))

    @classmethod
    def from_keyframes(cls, keyframes: Mapping[int, Tuple[np.ndarray, Sequence[float]]],
                       frames: int) -> "RigidSchedule":
        """Fill missing frames: slerp for rotation, linear for translation;
        frames after the last keyframe hold its value."""
        keys = sorted(keyframes)
        if not keys or keys[0] != 0:
            raise ValidationError("keyframes must include frame 0")
        if keys[-1] >= frames:
            raise ValidationError(f"keyframe {keys[-1]} beyond {frames} frames")
        Rk = np.stack([check_rotation(keyframes[k][0]) for k in keys])
        tk = np.stack([np.asarray(keyframes[k][1], dtype=np.float64).reshape(3) for k in keys])
        ts = np.arange(frames, dtype=np.float64)
        clipped = np.minimum(ts, keys[-1])
        if len(keys) == 1:
            R = np.repeat(Rk, frames, axis=0)
        else:
            R = Slerp(keys, Rotation.from_matrix(Rk))(clipped).as_matrix()
            # keep keyframes bit-exact
            for k, r in zip(keys, Rk):
                R[k] = r
        t = np.stack([np.interp(clipped, keys, tk[:, j]) for j in range(3)], axis=1)
        return cls(R, t)

    def then(self, other: "RigidSchedule") -> "RigidSchedule":
        """Apply ``self`` first, then ``other`` (same pivot)."""
        if len(other) != len(self):
            raise InputError("schedules differ in length")
        R = other.rotations @ self.rotations
        t = np.einsum("tij,tj->ti", other.rotations, self.translations) + other.translations
        return RigidSchedule(R, t)


def load_schedule(path: str | PathLike, frames: int) -> RigidSchedule:
    """Parse an FXSC file (``frame r00..r22 tx ty tz`` per keyframe)."""
    keys = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            fields = s.split()
            if len(fields) != 13:
                raise FormatError(f"{path}:{lineno}: expected 13 fields, got {len(fields)}")
            try:
                idx = int(fields[0])
                vals = np.array([float(x) for x in fields[1:]])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if idx in keys:
                raise FormatError(f"{path}:{lineno}: duplicate frame {idx}")
            keys[idx] = (vals[:9].reshape(3, 3), vals[9:])
    if 0 not in keys:
        raise FormatError(f"{path}: frame 0 missing")
    return RigidSchedule.from_keyframes(keys, frames)


def save_schedule(sched: RigidSchedule, path: str | PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# frame r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n")
        for i, (R, t) in enumerate(zip(sched.rotations, sched.translations)):
            f.write(f"{i} " + " ".join(repr(float(v)) for v in (*R.ravel(), *t)) + "\n")


def select_points(traj: PointTrajectorySet, region: np.ndarray, frame: int,
                  intr: CameraIntrinsics) -> np.ndarray:
    """Ids of points visible at ``frame`` whose projection falls in ``region``."""
    region = np.asarray(region, dtype=bool)
    if region.shape != (intr.height, intr.width):
        raise InputError(f"region {region.shape} does not match canvas {(intr.height, intr.width)}")
    if not 0 <= frame < traj.frame_count:
        raise InputError(f"frame {frame} out of range")
    u, v, _, ok = project_points(traj.positions[frame], intr)
    ok &= traj.visibility[frame]
    ids = np.flatnonzero(ok)
    return ids[region[v[ids], u[ids]]]


def default_pivot(traj: PointTrajectorySet, subset) -> np.ndarray:
    """Centroid of the subset's frame-0 visible positions."""
    subset = np.asarray(subset, dtype=np.int64)
    vis = traj.visibility[0, subset]
    pts = traj.positions[0, subset[vis]] if vis.any() else traj.positions[0, subset]
    return pts.mean(axis=0)


def apply_rigid_schedule(traj: PointTrajectorySet, subset, sched: RigidSchedule,
                         pivot: Optional[Sequence[float]] = None) -> PointTrajectorySet:
    """Move the subset by ``R_t (p - pivot) + pivot + tau_t``; other points
    and all visibility flags are untouched."""
    subset = np.unique(np.asarray(subset, dtype=np.int64))
    if subset.size == 0:
        raise EmptySelectionError("empty point subset")
    if len(sched) != traj.frame_count:
        raise InputError(f"schedule has {len(sched)} frames, trajectories {traj.frame_count}")
    if subset[0] < 0 or subset[-1] >= traj.point_count:
        raise InputError("subset ids out of range")
    c = default_pivot(traj, subset) if pivot is None else np.asarray(pivot, dtype=np.float64)
    pos = np.array(traj.positions)
    eye = np.eye(3)
    for t in range(traj.frame_count):
        R, tau = sched.rotations[t], sched.translations[t]
        sub = pos[t, subset]
        if np.array_equal(R, eye):
            # a pure translation skips the pivot round-trip, so identity frames stay bit-exact
            moved = sub + tau if tau.any() else sub
        else:
            moved = (sub - c) @ R.T + c + tau
        pos[t, subset] = moved
    return traj.replace(positions=pos)


def build_edit_mask(traj: PointTrajectorySet, subset: Iterable[int]) -> np.ndarray:
    """``(T, N)`` uint8: 1 for subset points at frames where they are visible."""
    m = np.zeros(traj.visibility.shape, dtype=np.uint8)
    ids = np.asarray(list(subset), dtype=np.int64)
    if ids.size:
        m[:, ids] = traj.visibility[:, ids]
    return m


@dataclass(frozen=True, eq=False)
class AppearanceCondition:
    frames: np.ndarray   # (T, H, W, 3) uint8
    regions: np.ndarray  # (T, H, W) bool, after dilation


def make_appearance_condition(video: np.ndarray, regions: np.ndarray, dilation: int = DEFAULT_DILATION,
                              mode: str = "v2v") -> AppearanceCondition:
    """Fill (dilated) regions with gray 127.

    ``regions`` is ``(T, H, W)`` or a single ``(H, W)`` broadcast to every
    frame. ``mode="i2v"`` masks frames 1..T-1 entirely.
    """
    video = np.asarray(video)
    if video.ndim != 4 or video.shape[-1] != 3:
        raise InputError(f"video must be (T, H, W, 3), got {video.shape}")
    T, H, W, _ = video.shape
    reg = np.asarray(regions, dtype=bool)
    if reg.shape == (H, W):
        reg = np.broadcast_to(reg, (T, H, W))
    if reg.shape != (T, H, W):
        raise InputError(f"regions {reg.shape} do not match video {(T, H, W)}")
    if dilation < 0:
        raise ValidationError("dilation must be non-negative")
    if mode not in ("v2v", "i2v"):
        raise ValidationError(f"mode must be 'v2v' or 'i2v', got {mode!r}")
    out_reg = np.array(reg)
    if dilation > 0:
        se = np.ones((2 * dilation + 1, 2 * dilation + 1), dtype=bool)
        for t in range(T):
            out_reg[t] = binary_dilation(reg[t], structure=se)
    if mode == "i2v":
        out_reg[1:] = True
    frames = np.array(video, dtype=np.uint8)
    frames[out_reg] = GRAY
    return AppearanceCondition(frames, out_reg)


# --------------------------------------------------------------- PNG I/O

def load_region_mask(path: str | PathLike) -> np.ndarray:
    """8-bit PNG -> bool array (nonzero = inside)."""
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0


def load_frames(path: str | PathLike) -> np.ndarray:
    """A single image or a directory of PNG frames (sorted by name) as
    ``(T, H, W, 3)`` uint8."""
    from PIL import Image

    p = Path(path)
    files = sorted(p.glob("*.png")) if p.is_dir() else [p]
    if not files:
        raise InputError(f"no PNG frames in {p}")
    frames = []
    for f in files:
        with Image.open(f) as img:
            frames.append(np.asarray(img.convert("RGB")))
    return np.stack(frames)


def save_frames(frames: np.ndarray, directory: str | PathLike, prefix: str = "frame") -> None:
    from PIL import Image

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for t, fr in enumerate(frames):
        Image.fromarray(np.asarray(fr, dtype=np.uint8)).save(d / f"{prefix}_{t:04d}.png")
