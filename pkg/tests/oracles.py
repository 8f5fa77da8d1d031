"""Brute-force reference implementations used by the tests.

Scalar Python throughout, sharing no code path with the package apart from
plain data containers.
"""
import math

import numpy as np

# ColorBrewer Spectral-11, typed in independently of the package table.
SPECTRAL_HEX = ["9e0142", "d53e4f", "f46d43", "fdae61", "fee08b", "ffffbf",
                "e6f598", "abdda4", "66c2a5", "3288bd", "5e4fa2"]
SPECTRAL_RGB = [tuple(int(h[i:i + 2], 16) / 255.0 for i in (0, 2, 4)) for h in SPECTRAL_HEX]


def round_away(x):
    return math.copysign(math.floor(abs(x) + 0.5), x)


def project(fx, fy, cx, cy, W, H, p):
    x, y, z = (float(c) for c in p)
    if not z > 0:
        return None
    u = round_away(fx * x / z + cx)
    v = round_away(fy * y / z + cy)
    if 0 <= u < W and 0 <= v < H:
        return int(u), int(v), z
    return None


def render_frame_oracle(points, attrs, vis, fx, fy, cx, cy, H, W, k):
    """For every pixel scan all points, keep the nearest covering one
    (equal depth: larger index)."""
    half = k // 2
    proj = [project(fx, fy, cx, cy, W, H, p) if vis[i] else None for i, p in enumerate(points)]
    out = np.zeros((H, W, attrs.shape[1]), dtype=attrs.dtype)
    for r in range(H):
        for c in range(W):
            best = None
            for i, pr in enumerate(proj):
                if pr is None:
                    continue
                u, v, z = pr
                if abs(u - c) <= half and abs(v - r) <= half:
                    if best is None or z < best[1] or (z == best[1] and i > best[0]):
                        best = (i, z)
            if best is not None:
                out[r, c] = attrs[best[0]]
    return out


def spectral(x):
    x = min(1.0, max(0.0, x))
    seg = min(int(x * 10), 9)
    f = x * 10 - seg
    a, b = SPECTRAL_RGB[seg], SPECTRAL_RGB[seg + 1]
    return tuple(a[j] + (b[j] - a[j]) * f for j in range(3))


def attributes_oracle(p0_cam, z_now, mask, ref_points, all_depths, eps):
    """Attribute vector evaluated straight from the definitions."""
    xs = [p[0] for p in ref_points]
    ys = [p[1] for p in ref_points]
    ws = [1.0 / (p[2] + eps) for p in ref_points]

    def unit(v, vals):
        lo, hi = min(vals), max(vals)
        # spans at rounding-noise level count as a single value
        if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
            return 0.5
        return min(1.0, max(0.0, (v - lo) / (hi - lo)))

    ident = [unit(p0_cam[0], xs), unit(p0_cam[1], ys), unit(1.0 / (p0_cam[2] + eps), ws)]
    freq = []
    for v in ident:
        for l in range(4):
            freq.append((math.cos(2 ** l * math.pi * v) + 1) / 2)
    zlo, zhi = min(all_depths), max(all_depths)
    zn = 0.5 if zhi - zlo <= 1e-12 * max(1.0, abs(zlo), abs(zhi)) else min(1.0, max(0.0, (z_now - zlo) / (zhi - zlo)))
    return ident + freq + list(spectral(zn)) + [float(mask)]


def world_to_cam(R, t, w):
    return [sum(R[i][j] * w[j] for j in range(3)) + t[i] for i in range(3)]


def motion_video_oracle(world, vis, Rs, ts, intr, mask, H, W, k, eps=1e-6):
    """Per frame: transform, evaluate attributes directly, resolve each pixel
    by the nearest covering visible point."""
    T, N = len(world), len(world[0])
    fx, fy, cx, cy = intr
    cam = [[world_to_cam(Rs[t], ts[t], world[t][i]) for i in range(N)] for t in range(T)]
    ref = [cam[0][i] for i in range(N) if vis[0][i]]
    depths = [cam[t][i][2] for t in range(T) for i in range(N) if vis[t][i]]
    frames = []
    for t in range(T):
        attrs = np.array([attributes_oracle(cam[0][i], cam[t][i][2], mask[t][i], ref, depths, eps)
                          for i in range(N)])
        frames.append(render_frame_oracle(cam[t], attrs, vis[t], fx, fy, cx, cy, H, W, k))
    return np.stack(frames)


def grid_stride_count(gw, gh, stride):
    return sum(1 for r in range(gh) for c in range(gw) if r % stride == 0 and c % stride == 0)
