"""Camera-pose fidelity metrics: rotation and translation errors between a
generated and a ground-truth pose sequence, both relative to frame 0."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .camera import CameraTrajectory, check_rotation
from .errors import InputError, ValidationError

ZERO_TRANSLATION = 1e-12


def rotmat_to_quat(R) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0`` for a rotation matrix.

    Shepperd's method: branch on the largest of the trace and diagonal to
    avoid dividing by a small number.
    """
    R = check_rotation(R)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    d = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(d))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def quat_to_rotmat(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True, eq=False)
class PoseSequence:
    quaternions: np.ndarray   # (T, 4) w, x, y, z
    translations: np.ndarray  # (T, 3)

    def __post_init__(self):
        q = np.array(self.quaternions, dtype=np.float64)
        t = np.array(self.translations, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != 4 or t.shape != (len(q), 3) or len(q) < 1:
            raise ValidationError(f"need (T,4) quaternions and (T,3) translations, got {q.shape}, {t.shape}")
        if np.abs(np.linalg.norm(q, axis=1) - 1.0).max() > 1e-9:
            raise ValidationError("quaternions must have unit norm")
        if abs(abs(q[0, 0]) - 1.0) > 1e-9 or np.abs(t[0]).max() > 1e-9:
            raise ValidationError("frame 0 must be the identity pose")
        object.__setattr__(self, "quaternions", q)
        object.__setattr__(self, "translations", t)

    def __len__(self):
        return len(self.quaternions)

    @classmethod
    def from_trajectory(cls, cams: CameraTrajectory) -> "PoseSequence":
        """Poses relative to the first camera: ``E_i E_0^-1``."""
        R0, t0 = cams.poses[0].rotation, cams.poses[0].translation
        qs, ts = [], []
        for p in cams.poses:
            Rrel = p.rotation @ R0.T
            # re-orthonormalize away accumulated rounding
            u, _, vt = np.linalg.svd(Rrel)
            Rrel = u @ vt
            qs.append(rotmat_to_quat(Rrel))
            ts.append(p.translation - Rrel @ t0)
        ts[0] = np.zeros(3)
        qs[0] = np.array([1.0, 0.0, 0.0, 0.0])
        return cls(np.stack(qs), np.stack(ts))


def _check_pair(gen: PoseSequence, gt: PoseSequence):
    if len(gen) != len(gt):
        raise InputError(f"frame count mismatch: {len(gen)} != {len(gt)}")
    if len(gen) < 2:
        raise InputError("need at least 2 frames")


def _arccos_deg(c: float) -> float:
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def rot_err(gen: PoseSequence, gt: PoseSequence) -> float:
    """Degrees: arccos of the mean |<q_gen, q_gt>| over frames 2..T."""
    _check_pair(gen, gt)
    dots = np.einsum("ij,ij->i", gen.quaternions[1:], gt.quaternions[1:])
    # sign canonicalization: q and -q are the same rotation
    return _arccos_deg(float(np.abs(dots).mean()))


def trans_err_details(gen: PoseSequence, gt: PoseSequence):
    """``(degrees, used_frames, degenerate)``; frames where either
    translation is zero are skipped."""
    _check_pair(gen, gt)
    a, b = gen.translations[1:], gt.translations[1:]
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    keep = (na > ZERO_TRANSLATION) & (nb > ZERO_TRANSLATION)
    if not keep.any():
        return 0.0, 0, True
    cos = np.einsum("ij,ij->i", a[keep] / na[keep, None], b[keep] / nb[keep, None])
    return _arccos_deg(float(cos.mean())), int(keep.sum()), False


def trans_err(gen: PoseSequence, gt: PoseSequence) -> float:
    """Degrees: arccos of the mean cosine between unit translations over
    frames 2..T."""
    deg, _, degenerate = trans_err_details(gen, gt)
    if degenerate:
        warnings.warn("all translations are zero; trans_err defined as 0", RuntimeWarning, stacklevel=2)
    return deg


@dataclass(frozen=True)
class PoseReport:
    rot_err_deg: float
    trans_err_deg: float
    frames: int
    translation_frames_used: int
    degenerate_translation: bool

    def format(self, machine: bool = False) -> str:
        line = (f"rot_err_deg={self.rot_err_deg:.6g} trans_err_deg={self.trans_err_deg:.6g} "
                f"frames={self.frames}")
        if machine:
            line += (f"\ntranslation_frames_used={self.translation_frames_used}"
                     f"\ndegenerate_translation={int(self.degenerate_translation)}")
        return line


def evaluate_poses(gen: CameraTrajectory, gt: CameraTrajectory) -> PoseReport:
    a, b = PoseSequence.from_trajectory(gen), PoseSequence.from_trajectory(gt)
    deg, used, degenerate = trans_err_details(a, b)
    return PoseReport(rot_err(a, b), deg, len(a), used, degenerate)
