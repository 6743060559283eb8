"""Hand-eye calibration for a scene-fixed camera observing a wrist marker.

Given paired end-effector poses (robot base -> gripper, from kinematics) and
marker observations (camera -> marker, from vision), consecutive samples form
relative-motion pairs (A_i, B_i) with A_i X = X B_i, where X is the unknown
base -> camera transform. The rotation is solved in closed form as a least
squares problem over unit quaternions: each pair contributes the 4x4 system
(L(q_A) - R(q_B)) q_X = 0 and q_X is the eigenvector of the smallest
eigenvalue of the accumulated quadratic form. Translation follows from the
stacked linear system (R_A - I) t_X = R_X t_B - t_A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import (
    RigidTransform,
    quat_from_axis_angle,
    quat_mul,
    quat_normalize,
    quat_rotation_angle,
    quat_to_axis_angle,
    quat_to_matrix,
    random_unit_quaternion,
)


class DegenerateMotionError(Exception):
    """All rotation axes of the relative motions are (nearly) parallel."""


@dataclass(frozen=True, eq=False)
class CalibrationSample:
    end_effector_pose: RigidTransform  # base -> gripper
    marker_pose: RigidTransform  # camera -> marker


@dataclass(frozen=True)
class ResidualStats:
    rotation_rms_rad: float
    translation_rms_m: float
    n_pairs: int


_MIN_MOTION_RAD = 1e-8


def _relative_motions(samples) -> list[tuple[RigidTransform, RigidTransform]]:
    pairs = []
    for i in range(len(samples) - 1):
        g0, g1 = samples[i].end_effector_pose, samples[i + 1].end_effector_pose
        m0, m1 = samples[i].marker_pose, samples[i + 1].marker_pose
        a = g1 @ g0.inverse()
        b = m1 @ m0.inverse()
        pairs.append((a, b))
    return pairs


def _quat_left(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [[w, -x, -y, -z], [x, w, -z, y], [y, z, w, -x], [z, -y, x, w]]
    )


def _quat_right(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [[w, -x, -y, -z], [x, w, z, -y], [y, -z, w, x], [z, y, -x, w]]
    )


def _check_axis_spread(pairs, min_axis_separation_deg: float) -> None:
    axes = []
    for a, _ in pairs:
        angle = quat_rotation_angle(a.rotation)
        if angle > _MIN_MOTION_RAD:
            axis, _ = quat_to_axis_angle(a.rotation)
            axes.append(axis)
    if len(axes) < 2:
        raise DegenerateMotionError(
            "degenerate motion set: fewer than two informative rotations"
        )
    best = 0.0
    for i in range(len(axes)):
        for j in range(i + 1, len(axes)):
            cosang = min(1.0, abs(float(axes[i] @ axes[j])))
            best = max(best, float(np.degrees(np.arccos(cosang))))
    if best < min_axis_separation_deg:
        raise DegenerateMotionError(
            f"degenerate motion set: rotation axes within {best:.2f} deg of a "
            f"common line (need >= {min_axis_separation_deg} deg)"
        )


def solve_handeye(samples, min_axis_separation_deg: float = 5.0) -> RigidTransform:
    """Closed-form base -> camera estimate from >= 3 pose pairs.

    Raises ValueError for too few samples and DegenerateMotionError when the
    relative rotations do not span two sufficiently separated axes.
    """
    samples = list(samples)
    if len(samples) < 3:
        raise ValueError(f"need at least 3 samples, got {len(samples)}")
    pairs = _relative_motions(samples)
    _check_axis_spread(pairs, min_axis_separation_deg)

    acc = np.zeros((4, 4))
    for a, b in pairs:
        qa = a.rotation
        qb = b.rotation
        # conjugate rotations share their angle; match scalar signs per pair
        if qa[0] * qb[0] < 0:
            qb = -qb
        n = _quat_left(qa) - _quat_right(qb)
        acc += n.T @ n
    vals, vecs = np.linalg.eigh(acc)
    q = quat_normalize(vecs[:, 0])
    if q[0] < 0:
        q = -q
    rot = quat_to_matrix(q)

    lhs = np.zeros((3 * len(pairs), 3))
    rhs = np.zeros(3 * len(pairs))
    for i, (a, b) in enumerate(pairs):
        lhs[3 * i : 3 * i + 3] = a.rotation_matrix() - np.eye(3)
        rhs[3 * i : 3 * i + 3] = rot @ b.translation - a.translation
    t, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return RigidTransform(q, t)


def residual(samples, estimate: RigidTransform) -> ResidualStats:
    """RMS rotation/translation residuals of A X = X B over all pairs."""
    pairs = _relative_motions(list(samples))
    if not pairs:
        raise ValueError("need at least one relative-motion pair (>= 2 samples)")
    rot_sq = 0.0
    trans_sq = 0.0
    for a, b in pairs:
        left = a @ estimate
        right = estimate @ b
        rot_sq += left.rotation_angle_to(right) ** 2
        trans_sq += left.translation_distance_to(right) ** 2
    n = len(pairs)
    return ResidualStats(
        rotation_rms_rad=float(np.sqrt(rot_sq / n)),
        translation_rms_m=float(np.sqrt(trans_sq / n)),
        n_pairs=n,
    )


def generate_dataset(
    ground_truth: RigidTransform,
    n: int,
    rot_noise: float = 0.0,
    trans_noise: float = 0.0,
    seed: int = 0,
) -> list[CalibrationSample]:
    """Synthetic pose pairs consistent with a base -> camera ground truth.

    End-effector poses are sampled in a working volume in front of the camera
    with uniformly random orientations; marker observations follow from the
    ground truth and a fixed (seed-derived) gripper -> marker mount, then get
    perturbed by the given rotation (radians) and translation (meters) noise.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    rng = np.random.default_rng(seed)
    mount = RigidTransform(random_unit_quaternion(rng), rng.uniform(-0.05, 0.05, 3))
    cam_from_base = ground_truth.inverse()
    samples = []
    for _ in range(n):
        # gripper somewhere in a box in front of the camera, any orientation
        p_cam = np.array(
            [rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), rng.uniform(0.4, 0.9)]
        )
        g = RigidTransform(random_unit_quaternion(rng), ground_truth.apply(p_cam))
        marker = cam_from_base @ g @ mount
        if rot_noise > 0:
            axis = rng.normal(size=3)
            dq = quat_from_axis_angle(axis, rng.normal(0.0, rot_noise))
            marker = RigidTransform(quat_mul(marker.rotation, dq), marker.translation)
        if trans_noise > 0:
            marker = RigidTransform(
                marker.rotation, marker.translation + rng.normal(0.0, trans_noise, 3)
            )
        samples.append(CalibrationSample(end_effector_pose=g, marker_pose=marker))
    return samples


# --- plain-text sample records ---------------------------------------------------
# one line per sample: end-effector 7-tuple then marker 7-tuple
# (qw qx qy qz tx ty tz qw qx qy qz tx ty tz)


def write_samples(samples, path) -> None:
    with open(path, "w") as f:
        for s in samples:
            vals = np.concatenate([s.end_effector_pose.as_tuple7(), s.marker_pose.as_tuple7()])
            f.write(" ".join(repr(float(x)) for x in vals) + "\n")


def read_samples(path) -> list[CalibrationSample]:
    samples = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 14:
                raise ValueError(f"{path}:{line_no}: expected 14 values, got {len(tokens)}")
            vals = [float(t) for t in tokens]
            samples.append(
                CalibrationSample(
                    end_effector_pose=RigidTransform.from_tuple7(vals[:7]),
                    marker_pose=RigidTransform.from_tuple7(vals[7:]),
                )
            )
    return samples
