"""Command-line entry point.

Exit codes: 0 success, 1 I/O, 2 validation, 3 empty selection, 4 usage.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import camera, editing, raster, trajectory
from .errors import EmptySelectionError, FrameCountMismatch, ValidationError
from .metrics import evaluate_poses

log = logging.getLogger("motionsig")

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_EMPTY, EXIT_USAGE = 0, 1, 2, 3, 4

FORMATS = """\
file formats (all binary formats little-endian):
  FXTR  trajectories: "FXTR", u32 version=1, u32 T, u32 N, u8 grid_flag
        [u32 grid_w, u32 grid_h], T*N*3 float32 xyz, T*N uint8 visibility
  FXPO  poses, text, one line per frame:
        frame fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
        (world-to-camera, p_cam = R p_world + t; '#' comments)
  FXDM  depth map: "FXDM", u32 version=1, u32 H, u32 W, H*W float32
  FXSC  rigid schedule, text: frame r00..r22 tx ty tz (keyframes;
        frame 0 must be identity; gaps slerp/linear interpolated)
  FXMV  motion video: "FXMV", u32 version=1, u32 T, u32 H, u32 W, u32 C=19,
        float32 density, T*H*W*19 float32
  PNG   region masks: 8-bit, nonzero = inside
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Stage:
    name = "startup"


STAGE = _Stage()


def _stage(name: str) -> None:
    STAGE.name = name
    log.info("stage: %s", name)


def _canvas(text: str):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"canvas must look like WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("canvas dimensions must be positive")
    return w, h


def _floats(n):
    def parse(text):
        vals = [float(v) for v in text.split(",")]
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
        return vals
    return parse


def _shared(p):
    g = p.add_argument_group("shared options")
    g.add_argument("--canvas", type=_canvas, default=(raster.DEFAULT_CANVAS[1], raster.DEFAULT_CANVAS[0]),
                   metavar="WxH", help="raster size (default 768x512)")
    g.add_argument("--pointsize", type=int, default=raster.DEFAULT_POINTSIZE, metavar="K",
                   help="odd splat block side in pixels (default 3)")
    g.add_argument("--stride", type=int, default=1, metavar="S",
                   help="point downsampling stride; density d = 1/S^2 (default 1)")
    g.add_argument("--epsilon", type=float, default=trajectory.DEFAULT_EPSILON, metavar="E",
                   help="inverse-depth guard 1/(z+E) (default 1e-6)")
    g.add_argument("--threads", type=int, default=os.cpu_count() or 1, metavar="N",
                   help="frame-parallel render threads (default: all cores)")
    g.add_argument("--out", type=Path, metavar="DIR", help="output directory")
    g.add_argument("--no-previews", action="store_true", help="skip per-stream PNG previews")


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="motionsig", description="Motion control-signal toolkit.",
                  epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)
    top.add_argument("--config", type=Path, metavar="FILE",
                     help="key=value defaults (flags override the file)")
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)
    kw = dict(epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)

    p = sub.add_parser("render", help="trajectories + cameras -> motion video", **kw)
    p.add_argument("trajectories", type=Path, help="FXTR file (per-frame camera coordinates)")
    p.add_argument("--poses", type=Path, required=True, help="FXPO file (intrinsics per frame)")
    p.add_argument("--regions", type=Path, nargs="+", metavar="PNG",
                   help="edit-region masks, one per frame or one broadcast; sets the mask channel")
    _shared(p)

    p = sub.add_parser("retarget", help="reproject points onto a new camera trajectory", **kw)
    p.add_argument("mode", choices=["i2v", "v2v"])
    p.add_argument("--depth", type=Path, help="i2v: FXDM depth map")
    p.add_argument("--intrinsics", type=_floats(4), metavar="FX,FY,CX,CY",
                   help="i2v: source intrinsics (default: target frame 0)")
    p.add_argument("--trajectories", type=Path, help="v2v: FXTR tracked points")
    p.add_argument("--source-poses", type=Path, help="v2v: FXPO source cameras")
    p.add_argument("--target-poses", type=Path, help="FXPO target cameras")
    p.add_argument("--generate", choices=["static", "pan", "orbit", "dolly"],
                   help="synthesize the target trajectory instead of --target-poses")
    p.add_argument("--frames", type=int, default=49, help="--generate: frame count")
    p.add_argument("--displacement", type=_floats(3), default=[0.0, 0.0, 0.0], metavar="X,Y,Z",
                   help="--generate pan: final translation")
    p.add_argument("--distance", type=float, default=0.0, help="--generate dolly: final z translation")
    p.add_argument("--radius", type=float, default=1.0, help="--generate orbit: radius")
    p.add_argument("--arc", type=float, default=30.0, help="--generate orbit: swept degrees")
    _shared(p)

    p = sub.add_parser("manipulate", help="rigidly move a selected object", **kw)
    p.add_argument("trajectories", type=Path, help="FXTR file (T=1 is broadcast over the poses)")
    p.add_argument("--poses", type=Path, required=True, help="FXPO file")
    p.add_argument("--region", type=Path, required=True, help="PNG object mask")
    p.add_argument("--schedule", type=Path, required=True, help="FXSC rigid schedule")
    p.add_argument("--frame", type=int, default=0, help="frame used for selection")
    p.add_argument("--pivot", type=_floats(3), metavar="X,Y,Z", help="rotation centre (default centroid)")
    p.add_argument("--source", type=Path,
                   help="PNG image (i2v) or directory of PNG frames (v2v) for the appearance condition")
    p.add_argument("--dilation", type=int, default=editing.DEFAULT_DILATION,
                   help="gray region growth in pixels (default 4)")
    _shared(p)

    p = sub.add_parser("evaluate", help="rotation/translation error between pose files", **kw)
    p.add_argument("generated", type=Path, help="FXPO of the generated video")
    p.add_argument("ground_truth", type=Path, help="FXPO ground truth")
    p.add_argument("--machine", action="store_true", help="append key=value detail lines")

    p = sub.add_parser("downsample", help="stride-downsample an FXTR file", **kw)
    p.add_argument("trajectories", type=Path)
    _shared(p)
    return top


def _read_config(path: Path) -> dict:
    cfg = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            k, v = s.split("=", 1)
            cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def _apply_config(parser: argparse.ArgumentParser, cfg: dict) -> None:
    subs = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)][0]
    known = set()
    for sp in subs.choices.values():
        for action in sp._actions:
            if action.dest in cfg:
                known.add(action.dest)
                raw = cfg[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    val = raw.lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    try:
                        val = action.type(raw)
                    except (argparse.ArgumentTypeError, ValueError) as exc:
                        raise UsageError(f"config {action.dest}: {exc}") from None
                else:
                    val = raw
                sp.set_defaults(**{action.dest: val})
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")


# ------------------------------------------------------------------ helpers

def _require_out(args):
    if args.out is None:
        raise UsageError("--out DIR is required")
    return args.out


def _cfg(args) -> raster.SplatConfig:
    w, h = args.canvas
    return raster.SplatConfig(pointsize=args.pointsize, height=h, width=w)


def _poses(path, args):
    w, h = args.canvas
    return camera.load_poses(path, w, h)


def _render(traj, cams, args, edit_mask=None):
    _stage("normalization")
    stats = trajectory.compute_norm_stats(traj, 0, args.epsilon)
    cfg = _cfg(args)
    out = _require_out(args)
    _stage("render")
    frames = raster.iter_motion_frames(traj, stats, cams, edit_mask, cfg, threads=args.threads)
    with raster.MotionVideoWriter(out, traj.frame_count, cfg.height, cfg.width, traj.density,
                                  previews=not args.no_previews, threads=args.threads) as w:
        for frame in frames:
            w.write(frame)
    print(f"wrote {w.path} frames={traj.frame_count} density={traj.density:.6g}")
    return w.path


def _downsampled(traj, args):
    if args.stride == 1:
        return traj
    _stage("downsample")
    return trajectory.downsample(traj, trajectory.DownsampleSpec(args.stride))


def _region_edit_mask(traj, cams, masks):
    """Per-frame mask: visible points projecting inside that frame's region."""
    T, N = traj.visibility.shape
    if len(masks) not in (1, T):
        raise ValidationError(f"need 1 or {T} region masks, got {len(masks)}")
    out = np.zeros((T, N), dtype=np.uint8)
    for t in range(T):
        ids = editing.select_points(traj, masks[t if len(masks) > 1 else 0], t, cams.intrinsics[t])
        out[t, ids] = 1
    return out


# ----------------------------------------------------------------- commands

def cmd_render(args):
    _stage("load trajectories")
    traj = trajectory.load_trajectories(args.trajectories)
    _stage("load poses")
    cams = _poses(args.poses, args)
    if cams.frame_count != traj.frame_count:
        raise FrameCountMismatch(traj.frame_count, cams.frame_count, "trajectories and poses")
    traj = _downsampled(traj, args)
    mask = None
    if args.regions:
        _stage("region masks")
        mask = _region_edit_mask(traj, cams, [editing.load_region_mask(p) for p in args.regions])
    _render(traj, cams, args, mask)


def _target_cams(args, intr_fallback=None):
    if args.target_poses is not None:
        _stage("load target poses")
        return _poses(args.target_poses, args)
    if args.generate is None:
        raise UsageError("retarget needs --target-poses or --generate")
    w, h = args.canvas
    intr = intr_fallback or camera.CameraIntrinsics(float(w), float(w), w / 2, h / 2, w, h)
    return camera.generate_trajectory(args.generate, args.frames, intr,
                                      displacement=args.displacement, distance=args.distance,
                                      radius=args.radius, arc_degrees=args.arc)


def cmd_retarget(args):
    w, h = args.canvas
    if args.mode == "i2v":
        if args.depth is None:
            raise UsageError("i2v mode requires --depth")
        _stage("load depth map")
        depth = camera.load_depth_map(args.depth)
        src_intr = None
        if args.intrinsics is not None:
            src_intr = camera.CameraIntrinsics(*args.intrinsics, depth.shape[1], depth.shape[0])
        new_cams = _target_cams(args, src_intr.with_canvas(w, h) if src_intr else None)
        if src_intr is None:
            k = new_cams.intrinsics[0]
            src_intr = camera.CameraIntrinsics(k.fx, k.fy, k.cx, k.cy, depth.shape[1], depth.shape[0])
        _stage("lift depth")
        pts = camera.lift_depth_map(depth, src_intr, args.stride)
        pts = pts.replace(density=1.0 / args.stride ** 2)
        world = camera.broadcast_static(pts, new_cams.frame_count)
    else:
        if args.trajectories is None or args.source_poses is None:
            raise UsageError("v2v mode requires --trajectories and --source-poses")
        _stage("load trajectories")
        traj = trajectory.load_trajectories(args.trajectories)
        _stage("load poses")
        src = _poses(args.source_poses, args)
        new_cams = _target_cams(args)
        traj = _downsampled(traj, args)
        _stage("lift to world")
        world = camera.lift_to_world(traj, src)
    if new_cams.frame_count != world.frame_count:
        raise FrameCountMismatch(world.frame_count, new_cams.frame_count, "points and target poses")
    _stage("retarget")
    moved = camera.retarget(world, new_cams)
    _render(moved, new_cams.with_canvas(w, h), args)


def cmd_manipulate(args):
    _stage("load trajectories")
    traj = trajectory.load_trajectories(args.trajectories)
    _stage("load poses")
    cams = _poses(args.poses, args)
    if traj.frame_count == 1 and cams.frame_count > 1:
        traj = camera.broadcast_static(traj, cams.frame_count)
    if cams.frame_count != traj.frame_count:
        raise FrameCountMismatch(traj.frame_count, cams.frame_count, "trajectories and poses")
    traj = _downsampled(traj, args)
    _stage("load schedule")
    sched = editing.load_schedule(args.schedule, traj.frame_count)
    _stage("select points")
    region = editing.load_region_mask(args.region)
    subset = editing.select_points(traj, region, args.frame, cams.intrinsics[args.frame])
    if subset.size == 0:
        raise EmptySelectionError("region selects no visible points")
    _stage("apply schedule")
    edited = editing.apply_rigid_schedule(traj, subset, sched, args.pivot)
    mask = editing.build_edit_mask(edited, subset)
    path = _render(edited, cams, args, mask)
    if args.source is not None:
        _stage("appearance condition")
        video = editing.load_frames(args.source)
        if len(video) == 1:
            cond = editing.make_appearance_condition(
                np.repeat(video, traj.frame_count, axis=0), np.zeros(video.shape[1:3], bool),
                0, mode="i2v")
        else:
            mv = raster.load_motion_video(path)
            footprint = mv.data[..., 18] > 0
            if footprint.shape[1:] != region.shape:
                raise ValidationError("source frames and region mask differ in size")
            cond = editing.make_appearance_condition(video, footprint | region[None], args.dilation)
        editing.save_frames(cond.frames, _require_out(args) / "condition")
        print(f"wrote {len(cond.frames)} appearance-condition frames")


def cmd_evaluate(args):
    _stage("load poses")
    # canvas size is irrelevant to pose errors
    gen = camera.load_poses(args.generated, 1 << 30, 1 << 30)
    gt = camera.load_poses(args.ground_truth, 1 << 30, 1 << 30)
    if gen.frame_count != gt.frame_count:
        raise FrameCountMismatch(gen.frame_count, gt.frame_count, "generated and ground-truth poses")
    _stage("evaluate")
    print(evaluate_poses(gen, gt).format(machine=args.machine))


def cmd_downsample(args):
    _stage("load trajectories")
    traj = trajectory.load_trajectories(args.trajectories)
    traj = _downsampled(traj, args)
    out = _require_out(args)
    out.mkdir(parents=True, exist_ok=True)
    _stage("write")
    trajectory.save_trajectories(traj, out / "downsampled.fxtr")
    print(f"wrote {out / 'downsampled.fxtr'} points={traj.point_count} density={traj.density:.6g}")


COMMANDS = {"render": cmd_render, "retarget": cmd_retarget, "manipulate": cmd_manipulate,
            "evaluate": cmd_evaluate, "downsample": cmd_downsample}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    STAGE.name = "startup"
    try:
        if "--config" in argv:
            i = argv.index("--config")
            if i + 1 >= len(argv):
                raise UsageError("--config needs a file")
            _apply_config(parser, _read_config(Path(argv[i + 1])))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(name)s: %(message)s")
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptySelectionError as exc:
        print(f"error [{STAGE.name}]: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except ValidationError as exc:
        print(f"error [{STAGE.name}]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error [{STAGE.name}]: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
