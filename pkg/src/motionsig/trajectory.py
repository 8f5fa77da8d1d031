"""Point trajectory container, FXTR file I/O, normalization bounds and
stride downsampling."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from os import PathLike
from typing import Optional, Tuple

import numpy as np

from .errors import (
    CorruptFileError,
    EmptyReferenceError,
    EmptySelectionError,
    FormatError,
    InverseDepthSingularityError,
    ValidationError,
)

DEFAULT_EPSILON = 1e-6

FXTR_MAGIC = b"FXTR"
FXTR_VERSION = 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointTrajectorySet:
    """Positions ``(T, N, 3)`` and visibility ``(T, N)`` of tracked points.

    Positions are per-frame camera coordinates (+z forward) unless a caller
    explicitly treats them as world coordinates. ``source_grid`` is
    ``(grid_width, grid_height)`` when point ``i`` sits at grid row
    ``i // grid_width`` and column ``i % grid_width``. ``density`` is the
    fraction of full-density points kept by :func:`downsample`.
    """

    positions: np.ndarray
    visibility: np.ndarray
    source_grid: Optional[Tuple[int, int]] = None
    density: float = 1.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64, copy=True)
        vis = np.array(self.visibility, dtype=bool, copy=True)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise ValidationError(f"positions must be (T, N, 3), got {pos.shape}")
        if vis.shape != pos.shape[:2]:
            raise ValidationError(f"visibility shape {vis.shape} != positions {pos.shape[:2]}")
        T, N = vis.shape
        if T < 1 or N < 1:
            raise ValidationError(f"need T >= 1 and N >= 1, got T={T}, N={N}")
        bad = vis & ~np.isfinite(pos).all(axis=2)
        if bad.any():
            t, i = np.argwhere(bad)[0]
            raise ValidationError(f"non-finite visible position at frame {t}, point {i}")
        if self.source_grid is not None:
            gw, gh = (int(v) for v in self.source_grid)
            if gw * gh != N:
                raise ValidationError(f"source_grid {gw}x{gh} does not match N={N}")
            object.__setattr__(self, "source_grid", (gw, gh))
        if not 0.0 < self.density <= 1.0:
            raise ValidationError(f"density must lie in (0, 1], got {self.density}")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "visibility", _frozen(vis))

    @property
    def frame_count(self) -> int:
        return self.visibility.shape[0]

    @property
    def point_count(self) -> int:
        return self.visibility.shape[1]

    def replace(self, **changes) -> "PointTrajectorySet":
        kw = dict(positions=self.positions, visibility=self.visibility,
                  source_grid=self.source_grid, density=self.density)
        kw.update(changes)
        return PointTrajectorySet(**kw)


# ---------------------------------------------------------------- FXTR I/O

def save_trajectories(traj: PointTrajectorySet, path: str | PathLike) -> None:
    T, N = traj.frame_count, traj.point_count
    with open(path, "wb") as f:
        f.write(FXTR_MAGIC)
        f.write(struct.pack("<III", FXTR_VERSION, T, N))
        if traj.source_grid is None:
            f.write(struct.pack("<B", 0))
        else:
            f.write(struct.pack("<BII", 1, *traj.source_grid))
        f.write(np.ascontiguousarray(traj.positions, dtype="<f4").tobytes())
        f.write(traj.visibility.astype(np.uint8).tobytes())


def load_trajectories(path: str | PathLike) -> PointTrajectorySet:
    """Read an FXTR file.

    Raises FormatError on a bad magic/version/flag, CorruptFileError when the
    payload length disagrees with the header, ValidationError for a
    non-finite visible position.
    """
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 17 or buf[:4] != FXTR_MAGIC:
        raise FormatError(f"{path}: not an FXTR file")
    version, T, N = struct.unpack_from("<III", buf, 4)
    if version != FXTR_VERSION:
        raise FormatError(f"{path}: unsupported FXTR version {version}")
    grid_flag = buf[16]
    off = 17
    grid = None
    if grid_flag == 1:
        if len(buf) < off + 8:
            raise CorruptFileError(f"{path}: truncated grid header")
        grid = struct.unpack_from("<II", buf, off)
        off += 8
    elif grid_flag != 0:
        raise FormatError(f"{path}: grid flag must be 0 or 1, got {grid_flag}")
    n_pos = T * N * 3 * 4
    n_vis = T * N
    if len(buf) - off != n_pos + n_vis:
        raise CorruptFileError(
            f"{path}: header declares T={T}, N={N} ({n_pos + n_vis} payload bytes) "
            f"but file holds {len(buf) - off}")
    pos = np.frombuffer(buf, dtype="<f4", count=T * N * 3, offset=off).reshape(T, N, 3)
    vis_raw = np.frombuffer(buf, dtype=np.uint8, count=n_vis, offset=off + n_pos).reshape(T, N)
    if (vis_raw > 1).any():
        raise CorruptFileError(f"{path}: visibility bytes must be 0 or 1")
    return PointTrajectorySet(pos.astype(np.float64), vis_raw.astype(bool), source_grid=grid)


# ------------------------------------------------------------ downsampling

@dataclass(frozen=True)
class DownsampleSpec:
    stride: int = 1
    density: float = field(init=False)

    def __post_init__(self):
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValidationError(f"stride must be a positive integer, got {self.stride}")
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "density", 1.0 / self.stride ** 2)


def downsample(traj: PointTrajectorySet, spec: DownsampleSpec) -> PointTrajectorySet:
    """Keep a deterministic stride subset of points.

    Gridded sets keep grid cells whose row and column are multiples of the
    stride; ungridded sets keep every ``stride**2``-th point by index.
    """
    s = spec.stride
    if traj.source_grid is not None:
        gw, gh = traj.source_grid
        if s > gw and s > gh:
            raise EmptySelectionError(f"stride {s} exceeds both grid dimensions {gw}x{gh}")
        rows = np.arange(0, gh, s)
        cols = np.arange(0, gw, s)
        keep = (rows[:, None] * gw + cols[None, :]).ravel()
        grid = (len(cols), len(rows))
    else:
        N = traj.point_count
        if s > 1 and s >= N:
            raise EmptySelectionError(f"stride {s} leaves no points out of N={N}")
        keep = np.arange(0, N, s * s)
        grid = None
    return PointTrajectorySet(
        traj.positions[:, keep], traj.visibility[:, keep],
        source_grid=grid, density=traj.density * spec.density)


# ----------------------------------------------------------- normalization

# Spans below this fraction of the magnitude count as one value; a plane at
# constant depth that went through a world/camera round-trip picks up ~1e-16
# of noise that would otherwise be stretched over the whole [0, 1] range.
DEGENERATE_RTOL = 1e-12


def is_degenerate(lo: float, hi: float) -> bool:
    return hi - lo <= DEGENERATE_RTOL * max(1.0, abs(lo), abs(hi))

@dataclass(frozen=True)
class NormStats:
    """Reference-frame bounds for x, y and inverse depth, plus global raw
    depth bounds over every visible point of every frame."""

    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    inv_depth_range: Tuple[float, float]
    depth_range: Tuple[float, float]
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        for name in ("x_range", "y_range", "inv_depth_range", "depth_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValidationError(f"{name}: min {lo} > max {hi}")

    @property
    def degenerate(self) -> Tuple[bool, bool, bool]:
        return tuple(is_degenerate(lo, hi) for lo, hi in (self.x_range, self.y_range, self.inv_depth_range))

    @property
    def depth_degenerate(self) -> bool:
        return is_degenerate(*self.depth_range)


def compute_norm_stats(traj: PointTrajectorySet, reference_frame: int = 0,
                       epsilon: float = DEFAULT_EPSILON) -> NormStats:
    if not 0 <= reference_frame < traj.frame_count:
        raise ValidationError(f"reference frame {reference_frame} out of range")
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    vis = traj.visibility
    ref_vis = vis[reference_frame]
    if not ref_vis.any():
        raise EmptyReferenceError(f"no visible point in reference frame {reference_frame}")
    z_all = traj.positions[..., 2][vis]
    if (z_all <= -epsilon).any():
        t, i = np.argwhere(vis & (traj.positions[..., 2] <= -epsilon))[0]
        raise InverseDepthSingularityError(
            f"visible depth {traj.positions[t, i, 2]} <= -epsilon at frame {t}, point {i}")
    ref = traj.positions[reference_frame][ref_vis]
    w = 1.0 / (ref[:, 2] + epsilon)
    return NormStats(
        x_range=(float(ref[:, 0].min()), float(ref[:, 0].max())),
        y_range=(float(ref[:, 1].min()), float(ref[:, 1].max())),
        inv_depth_range=(float(w.min()), float(w.max())),
        depth_range=(float(z_all.min()), float(z_all.max())),
        epsilon=epsilon,
    )


def _unit(v, lo: float, hi: float):
    if is_degenerate(lo, hi):
        return np.full_like(v, 0.5)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def normalize_points(points: np.ndarray, stats: NormStats) -> np.ndarray:
    """Vectorised :func:`normalize_initial` over ``(..., 3)`` positions.

    Non-finite inputs (e.g. an untracked point) map to 0.5 on that axis.
    """
    p = np.asarray(points, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = 1.0 / (p[..., 2] + stats.epsilon)
        out = np.stack([
            _unit(p[..., 0], *stats.x_range),
            _unit(p[..., 1], *stats.y_range),
            _unit(w, *stats.inv_depth_range),
        ], axis=-1)
    out[~np.isfinite(out)] = 0.5
    return out


def normalize_initial(point, stats: NormStats) -> Tuple[float, float, float]:
    """Map a reference-frame position to ``[0, 1]^3`` (x, y, inverse depth)."""
    x, y, z = (float(c) for c in point)
    if not z > -stats.epsilon:
        raise InverseDepthSingularityError(f"depth {z} <= -epsilon")

    def unit(v, lo, hi):
        if is_degenerate(lo, hi):
            return 0.5
        return min(1.0, max(0.0, (v - lo) / (hi - lo)))

    w = 1.0 / (z + stats.epsilon)
    if math.isinf(w):
        return unit(x, *stats.x_range), unit(y, *stats.y_range), 1.0
    return unit(x, *stats.x_range), unit(y, *stats.y_range), unit(w, *stats.inv_depth_range)
