"""Rigid transforms with quaternion rotations.

Quaternions are stored (w, x, y, z) and kept unit-norm. The 7-tuple wire
format used throughout the toolkit is (qw qx qy qz tx ty tz).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def quat_mul(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product q1 ⊗ q2, both (w, x, y, z)."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError("quaternion norm too small to normalize")
    return q / n


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (Shepperd's method, numerically safe)."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_to_axis_angle(q: np.ndarray) -> tuple[np.ndarray, float]:
    """Rotation axis (unit) and angle in [0, pi]. Identity returns (+z, 0)."""
    q = quat_normalize(q)
    if q[0] < 0:
        q = -q
    vec = q[1:]
    s = np.linalg.norm(vec)
    angle = 2.0 * np.arctan2(s, q[0])
    if s < 1e-12:
        return np.array([0.0, 0.0, 1.0]), float(angle)
    return vec / s, float(angle)


def quat_rotation_angle(q: np.ndarray) -> float:
    """Geodesic rotation angle in radians, sign-insensitive."""
    q = quat_normalize(q)
    return float(2.0 * np.arctan2(np.linalg.norm(q[1:]), abs(q[0])))


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64)


def quat_slerp(q0: np.ndarray, q1: np.ndarray, t: float) -> np.ndarray:
    """Spherical interpolation along the shorter arc."""
    q0 = quat_normalize(q0)
    q1 = quat_normalize(q1)
    d = float(np.dot(q0, q1))
    if d < 0:
        q1, d = -q1, -d
    if d > 1 - 1e-12:
        return quat_normalize(q0 + t * (q1 - q0))
    theta = np.arccos(np.clip(d, -1.0, 1.0))
    return (np.sin((1 - t) * theta) * q0 + np.sin(t * theta) * q1) / np.sin(theta)


def random_unit_quaternion(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (Shoemake's subgroup algorithm)."""
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1 - u1), np.sqrt(u1)
    return np.array(
        [
            a * np.sin(2 * np.pi * u2),
            a * np.cos(2 * np.pi * u2),
            b * np.sin(2 * np.pi * u3),
            b * np.cos(2 * np.pi * u3),
        ]
    )


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) element: p_parent = R(rotation) @ p_child + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = quat_normalize(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_tuple7(values) -> "RigidTransform":
        v = np.asarray(values, dtype=np.float64).reshape(7)
        return RigidTransform(v[:4], v[4:])

    def as_tuple7(self) -> np.ndarray:
        return np.concatenate([self.rotation, self.translation])

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return RigidTransform(matrix_to_quat(m[:3, :3]), m[:3, 3])

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def random(rng: np.random.Generator, trans_scale: float = 1.0) -> "RigidTransform":
        return RigidTransform(
            random_unit_quaternion(rng), rng.uniform(-trans_scale, trans_scale, 3)
        )

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            quat_mul(self.rotation, other.rotation),
            self.translation + quat_rotate(self.rotation, other.translation),
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        qinv = quat_conj(self.rotation)
        return RigidTransform(qinv, -quat_rotate(qinv, self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (3,) or (..., 3) into the parent frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ quat_to_matrix(self.rotation).T + self.translation

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def rotation_angle_to(self, other: "RigidTransform") -> float:
        """Geodesic angle between the two rotations, radians."""
        return quat_rotation_angle(quat_mul(quat_conj(self.rotation), other.rotation))

    def translation_distance_to(self, other: "RigidTransform") -> float:
        return float(np.linalg.norm(self.translation - other.translation))

    def is_close(self, other: "RigidTransform", rot_tol: float = 1e-9, trans_tol: float = 1e-9) -> bool:
        return (
            self.rotation_angle_to(other) <= rot_tol
            and self.translation_distance_to(other) <= trans_tol
        )

    def __repr__(self):
        q, t = self.rotation, self.translation
        return (
            f"RigidTransform(q=[{q[0]:.6f} {q[1]:.6f} {q[2]:.6f} {q[3]:.6f}], "
            f"t=[{t[0]:.6f} {t[1]:.6f} {t[2]:.6f}])"
        )
