"""Quaternion and rigid-pose math shared by the whole package.

Quaternions are w-first, unit norm, and hemisphere-normalized (w >= 0)
so every orientation has a single canonical representation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUAT_TOL = 1e-9


def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    """Unit-normalize and pick the w >= 0 hemisphere representative."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    q = q / n
    # Canonical hemisphere: first nonzero component positive.
    for c in q:
        if c != 0.0:
            if c < 0.0:
                q = -q
            break
    return q


def assert_unit_quat(q, tol: float = QUAT_TOL) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have 4 components, got shape {q.shape}")
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise ValueError(f"quaternion is not unit length: |q| = {np.linalg.norm(q)!r}")
    return q


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector(s) v by quaternion q; v may be (3,) or (n, 3)."""
    return np.asarray(v, dtype=float) @ quat_to_mat(q).T


def quat_to_mat(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def mat_to_quat(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return quat_normalize(q)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate([[np.cos(h)], np.sin(h) * axis])


def rotvec_to_quat(rv) -> np.ndarray:
    rv = np.asarray(rv, dtype=float)
    angle = np.linalg.norm(rv)
    if angle < 1e-12:
        # First-order expansion keeps the map smooth through zero.
        return quat_normalize(np.concatenate([[1.0], 0.5 * rv]))
    return quat_from_axis_angle(rv / angle, angle)


def quat_to_rotvec(q) -> np.ndarray:
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = np.sqrt(max(1.0 - w * w, 0.0))
    angle = 2.0 * np.arctan2(s, w)
    if s < 1e-12:
        return 2.0 * np.array([x, y, z])
    return (angle / s) * np.array([x, y, z])


@dataclass
class Pose:
    """Rigid transform: rotation (unit quaternion, w-first) then translation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=quat_identity)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = np.asarray(self.orientation, dtype=float).reshape(4)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other in self's frame: world <- self <- other."""
        return Pose(self.position + quat_rotate(self.orientation, other.position),
                    quat_normalize(quat_mul(self.orientation, other.orientation)))

    def inverse(self) -> "Pose":
        inv_q = quat_conj(self.orientation)
        return Pose(-quat_rotate(inv_q, self.position), quat_normalize(inv_q))

    def apply(self, points) -> np.ndarray:
        return quat_rotate(self.orientation, points) + self.position

    def rotation(self) -> np.ndarray:
        return quat_to_mat(self.orientation)

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation.copy())


def frame_from_palm_axis(approach, fingers) -> np.ndarray:
    """Quaternion mapping local +z to `approach` and local +x to `fingers`.

    Both inputs must be unit and orthogonal; the frame is right-handed.
    """
    approach = np.asarray(approach, dtype=float)
    fingers = np.asarray(fingers, dtype=float)
    y = np.cross(approach, fingers)
    m = np.column_stack([fingers, y, approach])
    return mat_to_quat(m)


def direction_frame(direction, elevation_rad: float) -> tuple[np.ndarray, np.ndarray]:
    """Approach and finger axes for a horizontal approach direction.

    The approach (palm normal) tilts `direction` downward by
    `elevation_rad`; the finger axis points up-forward so that closing
    the fingers sweeps them across the approach line.
    """
    d = np.asarray(direction, dtype=float)
    n = np.linalg.norm(d[:2])
    if n < 1e-12:
        raise ValueError("approach direction must have a horizontal component")
    d = np.array([d[0] / n, d[1] / n, 0.0])
    ce, se = np.cos(elevation_rad), np.sin(elevation_rad)
    up = np.array([0.0, 0.0, 1.0])
    approach = ce * d - se * up
    fingers = se * d + ce * up
    return approach, fingers
