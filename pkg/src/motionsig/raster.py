"""Depth-sorted block splatting of attributed points into the 19-channel
motion video, plus FXMV / PNG export.

The splatting kernel is compiled (``motionsig._splat``) when available and
falls back to a NumPy implementation otherwise. Set ``MOTIONSIG_PURE_PYTHON=1``
to force the fallback.
"""
from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from . import _splat_py
from .camera import CameraIntrinsics, CameraTrajectory, project_points
from .encoding import ATTR_DIM, SPECTRAL, STREAMS, SpectralColormap, frame_attributes, static_attributes
from .errors import CorruptFileError, FormatError, FrameCountMismatch, InputError, ValidationError
from .trajectory import NormStats, PointTrajectorySet, normalize_points

if os.environ.get("MOTIONSIG_PURE_PYTHON", "") not in ("", "0"):
    _splat = None
else:
    try:
        from . import _splat
    except ImportError:  # pragma: no cover - depends on the build
        _splat = None

BACKEND = "compiled" if _splat is not None else "numpy"

DEFAULT_POINTSIZE = 3
DEFAULT_CANVAS = (512, 768)  # (H, W)


def splat_winners(u, v, z, on_screen, height, width, k, backend: Optional[str] = None):
    """Owner index per pixel (``-1`` for empty) using the chosen kernel."""
    backend = backend or BACKEND
    args = (np.ascontiguousarray(u, dtype=np.int64), np.ascontiguousarray(v, dtype=np.int64),
            np.ascontiguousarray(z, dtype=np.float64), np.asarray(on_screen, dtype=bool),
            int(height), int(width), int(k))
    if backend == "compiled":
        if _splat is None:
            raise RuntimeError("compiled splatting kernel is not available")
        return _splat.splat_winners(*args)
    if backend == "numpy":
        return _splat_py.splat_winners(*args)
    raise ValueError(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class SplatConfig:
    pointsize: int = DEFAULT_POINTSIZE
    height: int = DEFAULT_CANVAS[0]
    width: int = DEFAULT_CANVAS[1]

    def __post_init__(self):
        if self.pointsize < 1 or self.pointsize % 2 == 0:
            raise ValidationError(f"pointsize must be a positive odd integer, got {self.pointsize}")
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"bad canvas {self.width}x{self.height}")

    @property
    def canvas(self):
        return self.height, self.width


@dataclass(frozen=True, eq=False)
class MotionVideo:
    data: np.ndarray  # (T, H, W, 19) float32
    density: float = 1.0

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[-1] != ATTR_DIM:
            raise ValidationError(f"motion video must be (T, H, W, {ATTR_DIM}), got {self.data.shape}")

    @property
    def shape(self):
        return self.data.shape[:3]

    def stream(self, name: str) -> np.ndarray:
        return self.data[..., STREAMS[name]]


def _gather(winners: np.ndarray, attrs: np.ndarray, dtype) -> np.ndarray:
    H, W = winners.shape
    out = np.zeros((H, W, attrs.shape[1]), dtype=dtype)
    flat = winners.reshape(-1)
    hit = flat >= 0
    out.reshape(-1, attrs.shape[1])[hit] = attrs[flat[hit]]
    return out


def render_frame(points, attrs, vis, intr: CameraIntrinsics, cfg: SplatConfig,
                 backend: Optional[str] = None, dtype=None) -> np.ndarray:
    """Rasterize one frame: project, drop invisible/off-screen points, paint
    far-to-near k x k blocks. Returns ``(H, W, C)``; empty pixels are zero."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    attrs = np.asarray(attrs)
    vis = np.asarray(vis, dtype=bool).reshape(-1)
    if attrs.ndim != 2 or len(attrs) != len(points) or len(vis) != len(points):
        raise InputError(
            f"misaligned inputs: {len(points)} points, {attrs.shape} attrs, {vis.shape} visibility")
    if (intr.height, intr.width) != cfg.canvas:
        intr = intr.with_canvas(cfg.width, cfg.height)
    u, v, z, ok = project_points(points, intr)
    winners = splat_winners(u, v, z, ok & vis, cfg.height, cfg.width, cfg.pointsize, backend)
    return _gather(winners, attrs, dtype or attrs.dtype)


def _frame_positions(traj, cams, t, space):
    if space == "camera":
        return traj.positions[t]
    pose = cams.poses[t]
    return traj.positions[t] @ pose.rotation.T + pose.translation


def iter_motion_frames(traj: PointTrajectorySet, stats: Optional[NormStats], cams: CameraTrajectory,
                       edit_mask=None, cfg: SplatConfig = SplatConfig(),
                       cmap: SpectralColormap = SPECTRAL, *, space: str = "camera",
                       reference_frame: int = 0, threads: int = 1,
                       backend: Optional[str] = None) -> Iterator[np.ndarray]:
    """Yield float32 ``(H, W, 19)`` frames in order.

    ``space="camera"`` treats positions as per-frame camera coordinates (the
    cameras only supply intrinsics); ``space="world"`` first applies each
    frame's pose. ``stats`` must describe the camera-space points; pass
    ``None`` to compute them here with the default epsilon.
    """
    T, N = traj.frame_count, traj.point_count
    if cams.frame_count != T:
        raise FrameCountMismatch(T, cams.frame_count, "trajectories and cameras")
    if space not in ("camera", "world"):
        raise ValueError(f"space must be 'camera' or 'world', got {space!r}")
    if edit_mask is None:
        edit_mask = np.zeros((T, N), dtype=np.float64)
    edit_mask = np.asarray(edit_mask, dtype=np.float64)
    if edit_mask.shape != (T, N):
        raise InputError(f"edit mask shape {edit_mask.shape} != {(T, N)}")
    if stats is None:
        from .camera import retarget
        from .trajectory import compute_norm_stats
        stats = compute_norm_stats(traj if space == "camera" else retarget(traj, cams), reference_frame)
    p0 = _frame_positions(traj, cams, reference_frame, space)
    static = static_attributes(normalize_points(p0, stats))

    def one(t):
        pts = _frame_positions(traj, cams, t, space)
        attrs = frame_attributes(static, pts[:, 2], edit_mask[t], stats, cmap)
        return render_frame(pts, attrs, traj.visibility[t], cams.intrinsics[t], cfg,
                            backend=backend, dtype=np.float32)

    if threads <= 1:
        for t in range(T):
            yield one(t)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, T, threads):
            yield from pool.map(one, range(start, min(T, start + threads)))


def render_motion_video(traj: PointTrajectorySet, stats: Optional[NormStats], cams: CameraTrajectory,
                        edit_mask=None, cfg: SplatConfig = SplatConfig(),
                        cmap: SpectralColormap = SPECTRAL, **kw) -> MotionVideo:
    frames = list(iter_motion_frames(traj, stats, cams, edit_mask, cfg, cmap, **kw))
    return MotionVideo(np.stack(frames), density=traj.density)


# ------------------------------------------------------------------ export

FXMV_MAGIC = b"FXMV"
FXMV_HEADER = struct.Struct("<4sIIIIIf")


def preview_bytes(values: np.ndarray) -> np.ndarray:
    """[0, 1] values -> uint8 by ``floor(v * 255 + 0.5)``."""
    v = np.asarray(values, dtype=np.float64) * 255.0
    np.clip(v, 0.0, 255.0, out=v)
    v += 0.5
    np.floor(v, out=v)
    return v.astype(np.uint8)


def write_previews(frame: np.ndarray, t: int, directory: Path, compress_level: int = 1) -> None:
    """One PNG per stream: RGB for the 3-channel streams, gray for the mask."""
    from PIL import Image

    b = preview_bytes(frame)
    for name, chans in STREAMS.items():
        if len(chans) == 1:
            img = Image.fromarray(np.ascontiguousarray(b[..., chans[0]]), mode="L")
        else:
            img = Image.fromarray(np.ascontiguousarray(b[..., chans]), mode="RGB")
        img.save(directory / f"{name}_{t:04d}.png", compress_level=compress_level)


class MotionVideoWriter:
    """Streams frames into an FXMV file (and optional PNG previews) so the
    full raster never has to sit in memory.

    With ``threads > 1`` previews are encoded on a small pool; the FXMV bytes
    are always written sequentially in frame order.
    """

    def __init__(self, out_dir: str | PathLike, frames: int, height: int, width: int,
                 density: float = 1.0, previews: bool = True, filename: str = "motion.fxmv",
                 threads: int = 1):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.preview_dir = self.dir / "previews" if previews else None
        if self.preview_dir is not None:
            self.preview_dir.mkdir(exist_ok=True)
        self.path = self.dir / filename
        self.shape = (frames, height, width)
        self._t = 0
        self._pool = ThreadPoolExecutor(threads) if previews and threads > 1 else None
        self._pending = []
        self._threads = threads
        self._f = open(self.path, "wb")
        self._f.write(FXMV_HEADER.pack(FXMV_MAGIC, 1, frames, height, width, ATTR_DIM, density))

    def write(self, frame: np.ndarray) -> None:
        T, H, W = self.shape
        if self._t >= T or frame.shape != (H, W, ATTR_DIM):
            raise InputError(f"unexpected frame {self._t} with shape {frame.shape}")
        self._f.write(np.ascontiguousarray(frame, dtype="<f4").data)
        if self.preview_dir is not None:
            if self._pool is None:
                write_previews(frame, self._t, self.preview_dir)
            else:
                self._pending.append(self._pool.submit(write_previews, frame, self._t, self.preview_dir))
                if len(self._pending) > 2 * self._threads:
                    self._pending.pop(0).result()
        self._t += 1

    def _drain(self):
        if self._pool is not None:
            for fut in self._pending:
                fut.result()
            self._pool.shutdown()
            self._pool = None

    def close(self) -> None:
        try:
            self._drain()
        finally:
            self._f.close()
        if self._t != self.shape[0]:
            raise InputError(f"wrote {self._t} of {self.shape[0]} frames")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, *_):
        if exc_type is None:
            self.close()
        else:
            if self._pool is not None:
                self._pool.shutdown(cancel_futures=True)
            self._f.close()


def export_motion_video(mv: MotionVideo, path: str | PathLike, previews: bool = True) -> Path:
    T, H, W = mv.shape
    with MotionVideoWriter(path, T, H, W, mv.density, previews=previews) as w:
        for frame in mv.data:
            w.write(frame)
    return w.path


def load_motion_video(path: str | PathLike) -> MotionVideo:
    with open(path, "rb") as f:
        head = f.read(FXMV_HEADER.size)
        if len(head) < FXMV_HEADER.size or head[:4] != FXMV_MAGIC:
            raise FormatError(f"{path}: not an FXMV file")
        _, version, T, H, W, C, d = FXMV_HEADER.unpack(head)
        if version != 1 or C != ATTR_DIM:
            raise FormatError(f"{path}: unsupported FXMV version {version} / channels {C}")
        data = np.fromfile(f, dtype="<f4")
    if data.size != T * H * W * C:
        raise CorruptFileError(f"{path}: expected {T * H * W * C} values, got {data.size}")
    return MotionVideo(data.reshape(T, H, W, C).astype(np.float32), density=float(d))
