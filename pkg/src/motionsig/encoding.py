"""Per-point 19-dimensional control attributes.

Layout of an attribute vector (offsets)::

    0:3    identity   normalized reference (x, y, inverse depth)
    3:15   freq       cos(2^l pi v), l = 0..3, coordinate-major, remapped to [0, 1]
    15:18  depth      Spectral colour of the current normalized depth
    18     mask       binary edit flag
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AssemblyError
from .trajectory import NormStats

N_LEVELS = 4
ATTR_DIM = 19
IDENTITY = slice(0, 3)
FREQ = slice(3, 15)
DEPTH = slice(15, 18)
MASK = 18

# Raster stream grouping: freq channels regrouped level-major so that every
# stream is an (x, y, z) triple.
STREAMS = {
    "identity": [0, 1, 2],
    "freq0": [3, 7, 11],
    "freq1": [4, 8, 12],
    "freq2": [5, 9, 13],
    "freq3": [6, 10, 14],
    "depth": [15, 16, 17],
    "mask": [18],
}

# ColorBrewer Spectral, 11 classes.
SPECTRAL_11 = (
    (158, 1, 66), (213, 62, 79), (244, 109, 67), (253, 174, 97),
    (254, 224, 139), (255, 255, 191), (230, 245, 152), (171, 221, 164),
    (102, 194, 165), (50, 136, 189), (94, 79, 162),
)


@dataclass(frozen=True, eq=False)
class SpectralColormap:
    """Piecewise-linear colormap through evenly spaced anchors on [0, 1]."""

    anchors: np.ndarray
    positions: np.ndarray

    @classmethod
    def spectral(cls) -> "SpectralColormap":
        colors = np.array(SPECTRAL_11, dtype=np.float64) / 255.0
        pos = np.array([i / 10 for i in range(11)])
        colors.setflags(write=False)
        pos.setflags(write=False)
        return cls(colors, pos)

    def __call__(self, x):
        """Evaluate at scalar or array ``x`` (clamped to [0, 1]); returns ``(..., 3)``."""
        x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        p = self.positions
        i = np.clip(np.searchsorted(p, x, side="right") - 1, 0, len(p) - 2)
        f = (x - p[i]) / (p[i + 1] - p[i])
        f = f[..., None]
        return (1.0 - f) * self.anchors[i] + f * self.anchors[i + 1]


SPECTRAL = SpectralColormap.spectral()


def gamma(v: float) -> tuple:
    """Four-level cosine features ``cos(2^l * pi * v)``, raw values in [-1, 1]."""
    return tuple(math.cos((2 ** l) * math.pi * v) for l in range(N_LEVELS))


def encode_identity(p0_norm: Sequence[float]) -> np.ndarray:
    return np.array(p0_norm, dtype=np.float64).reshape(3)


def encode_freq(p0_norm: Sequence[float]) -> np.ndarray:
    raw = [c for v in p0_norm for c in gamma(float(v))]
    return (np.array(raw) + 1.0) / 2.0


def encode_freq_array(p0_norm: np.ndarray) -> np.ndarray:
    """Vectorised :func:`encode_freq`: ``(..., 3)`` -> ``(..., 12)``."""
    p = np.asarray(p0_norm, dtype=np.float64)
    scales = np.pi * 2.0 ** np.arange(N_LEVELS)
    raw = np.cos(p[..., :, None] * scales)
    return ((raw + 1.0) / 2.0).reshape(*p.shape[:-1], 3 * N_LEVELS)


def normalized_depth(z_raw, stats: NormStats):
    lo, hi = stats.depth_range
    z = np.asarray(z_raw, dtype=np.float64)
    if stats.depth_degenerate:
        return np.full_like(z, 0.5)
    return np.clip((z - lo) / (hi - lo), 0.0, 1.0)


def encode_depth(z_raw, stats: NormStats, cmap: SpectralColormap = SPECTRAL) -> np.ndarray:
    """Spectral colour of the depth normalized by the global depth bounds
    (near -> 0, far -> 1; degenerate range -> 0.5)."""
    return cmap(normalized_depth(z_raw, stats))


def assemble_attributes(identity, freq, depth_rgb, mask) -> np.ndarray:
    parts = [np.asarray(identity, dtype=np.float64), np.asarray(freq, dtype=np.float64),
             np.asarray(depth_rgb, dtype=np.float64)]
    for name, part, n in zip(("identity", "freq", "depth"), parts, (3, 12, 3)):
        if part.shape != (n,):
            raise AssemblyError(f"{name} must have {n} components, got shape {part.shape}")
    m = np.asarray(mask, dtype=np.float64).reshape(-1)
    if m.shape != (1,) or m[0] not in (0.0, 1.0):
        raise AssemblyError(f"mask must be a single 0/1 value, got {mask!r}")
    return np.concatenate(parts + [m])


def static_attributes(p0_norm: np.ndarray) -> np.ndarray:
    """Identity and freq block ``(N, 15)`` for normalized reference positions."""
    p = np.asarray(p0_norm, dtype=np.float64)
    return np.concatenate([p, encode_freq_array(p)], axis=-1)


def frame_attributes(static: np.ndarray, z_raw: np.ndarray, mask: np.ndarray,
                     stats: NormStats, cmap: SpectralColormap = SPECTRAL,
                     dtype=np.float64) -> np.ndarray:
    """Full ``(N, 19)`` attribute rows for one frame."""
    out = np.empty((static.shape[0], ATTR_DIM), dtype=dtype)
    out[:, :15] = static
    out[:, DEPTH] = encode_depth(z_raw, stats, cmap)
    out[:, MASK] = mask
    return out
