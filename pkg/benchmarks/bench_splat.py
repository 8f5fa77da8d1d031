"""Compare the compiled splat kernel against the NumPy fallback.

    python benchmarks/bench_splat.py [--repeat 5] [--points 196608]

Times ``splat_winners`` alone and a full ``render_frame`` (projection,
splat, attribute gather) on a 768x512 canvas, and checks that both
backends produce the same winner map.
"""
import argparse
import time

import numpy as np

from motionsig import raster
from motionsig.camera import CameraIntrinsics, project_points
from motionsig.raster import SplatConfig, render_frame, splat_winners


def scene(n, seed=0):
    rng = np.random.default_rng(seed)
    intr = CameraIntrinsics(600.0, 600.0, 383.6, 255.6, 768, 512)
    z = rng.uniform(1.0, 6.0, n)
    pts = np.column_stack([rng.uniform(-0.7, 0.7, n) * z, rng.uniform(-0.45, 0.45, n) * z, z])
    attrs = rng.random((n, 19)).astype(np.float32)
    vis = rng.random(n) > 0.05
    return pts, attrs, vis, intr


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, nargs="+", default=[12_288, 49_152, 196_608])
    ap.add_argument("--pointsize", type=int, default=3)
    args = ap.parse_args()

    backends = ["numpy"] + (["compiled"] if raster.BACKEND == "compiled" else [])
    if len(backends) == 1:
        print("compiled extension not built; timing the NumPy fallback only")
    cfg = SplatConfig(args.pointsize, 512, 768)
    print(f"{'points':>8} {'stage':<13}" + "".join(f"{b:>12}" for b in backends) + "   speedup")
    for n in args.points:
        pts, attrs, vis, intr = scene(n)
        u, v, z, ok = project_points(pts, intr)
        ok &= vis
        maps = {b: splat_winners(u, v, z, ok, 512, 768, args.pointsize, backend=b) for b in backends}
        if len(backends) == 2:
            assert np.array_equal(maps["numpy"], maps["compiled"]), "backends disagree"
        for stage, fn in [
            ("splat", lambda b: splat_winners(u, v, z, ok, 512, 768, args.pointsize, backend=b)),
            ("render_frame", lambda b: render_frame(pts, attrs, vis, intr, cfg, backend=b)),
        ]:
            secs = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
            row = f"{n:>8} {stage:<13}" + "".join(f"{secs[b] * 1e3:>10.2f}ms" for b in backends)
            if len(backends) == 2:
                row += f"   {secs['numpy'] / secs['compiled']:.1f}x"
            print(row)


if __name__ == "__main__":
    main()
