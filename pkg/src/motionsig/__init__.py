"""Motion control signals from dynamic point trajectories.

Point trajectories are encoded into 19-channel per-point attributes
(normalized reference position, four-level cosine features, Spectral depth
colour, edit mask) and splatted far-to-near into a raster "motion video".
Camera retargeting, rigid object edits, appearance conditions and pose
error metrics cover the surrounding pipeline.
"""
from .camera import (
    CameraIntrinsics,
    CameraPose,
    CameraTrajectory,
    generate_trajectory,
    lift_depth_map,
    lift_to_world,
    project_2d,
    retarget,
)
from .editing import (
    AppearanceCondition,
    RigidSchedule,
    apply_rigid_schedule,
    build_edit_mask,
    make_appearance_condition,
    select_points,
)
from .encoding import (
    SPECTRAL,
    SpectralColormap,
    assemble_attributes,
    encode_depth,
    encode_freq,
    encode_identity,
    gamma,
)
from .metrics import PoseSequence, evaluate_poses, rot_err, rotmat_to_quat, trans_err
from .raster import BACKEND, MotionVideo, SplatConfig, export_motion_video, render_frame, render_motion_video
from .trajectory import (
    DownsampleSpec,
    NormStats,
    PointTrajectorySet,
    compute_norm_stats,
    downsample,
    load_trajectories,
    normalize_initial,
    save_trajectories,
)

__version__ = "0.1.0"
