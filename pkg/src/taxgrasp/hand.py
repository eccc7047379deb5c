"""Articulated hand model: kinematic chain, forward kinematics, PD joint
tracking, and the damped wrist pose servo.

The hand is a tree of links rooted at the palm. Link l's frame is its
joint frame: world_pose(l) = world_pose(parent) * offset_l * R(axis_l, q_l),
so collision spheres and contact points are expressed post-rotation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .transforms import (Pose, mat_to_quat, quat_conj, quat_from_axis_angle,
                         quat_mul, quat_normalize, quat_rotate, quat_to_mat,
                         quat_to_rotvec)


@dataclass
class JointSpec:
    axis: np.ndarray          # unit, in the child link's pre-rotation frame
    limits: tuple[float, float]
    parent_link: int

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(self.axis)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"joint axis must be unit length, got |a| = {n}")
        lo, hi = self.limits
        if not lo < hi:
            raise ValueError(f"joint limits must satisfy lo < hi, got {self.limits}")


@dataclass
class LinkSpec:
    name: str
    parent_joint: int | None   # None only for the palm
    offset: Pose               # parent link frame -> this joint frame
    sphere_centers: np.ndarray  # (S, 3) local
    sphere_radii: np.ndarray    # (S,)
    is_fingertip: bool = False
    is_palm: bool = False

    def __post_init__(self):
        self.sphere_centers = np.asarray(self.sphere_centers, dtype=float).reshape(-1, 3)
        self.sphere_radii = np.asarray(self.sphere_radii, dtype=float).reshape(-1)
        if len(self.sphere_centers) == 0:
            raise ValueError(f"link {self.name!r} has no collision spheres")
        if len(self.sphere_centers) != len(self.sphere_radii):
            raise ValueError(f"link {self.name!r}: sphere centers/radii length mismatch")


class HandDescription:
    """Immutable kinematic chain definition.

    Link 0 is the palm; link j+1 is driven by joint j. Finger chains are
    grouped so forward kinematics can batch all fingers depth by depth.
    """

    def __init__(self, name: str, joints: list[JointSpec], links: list[LinkSpec],
                 kp=None, kd=None, no_collide: list[tuple[str, str]] | None = None):
        if not links or not links[0].is_palm:
            raise ValueError("link 0 must be the palm")
        if len(links) != len(joints) + 1:
            raise ValueError("expected exactly one link per joint plus the palm")
        self.name = name
        self.joints = joints
        self.links = links
        self.no_collide = [tuple(p) for p in (no_collide or [])]
        self.dof = len(joints)
        self.num_links = len(links)
        kp = np.full(self.dof, 400.0) if kp is None else np.asarray(kp, dtype=float)
        self.kp = kp.reshape(self.dof).copy()
        # Critical damping per joint unless the file says otherwise.
        self.kd = (2.0 * np.sqrt(self.kp) if kd is None
                   else np.asarray(kd, dtype=float).reshape(self.dof).copy())
        self.joint_limits = np.array([j.limits for j in joints])  # (D, 2)
        self._check_tree()
        self._build_arrays()

    def _check_tree(self):
        seen = {0}
        for l, link in enumerate(self.links[1:], start=1):
            j = link.parent_joint
            if j is None or not 0 <= j < self.dof:
                raise ValueError(f"link {l} has invalid parent joint {j}")
            if self.joints[j].parent_link >= l:
                raise ValueError("links must be topologically ordered (parent before child)")
            seen.add(l)
        if len(seen) != self.num_links:
            raise ValueError("link graph is not a tree over all links")

    def _build_arrays(self):
        D = self.dof
        self.joint_axes = np.stack([j.axis for j in self.joints])            # (D, 3)
        self.parent_links = np.array([j.parent_link for j in self.joints])   # (D,)
        self.offset_pos = np.stack([self.links[l + 1].offset.position for l in range(D)])
        self.offset_rot = np.stack([quat_to_mat(self.links[l + 1].offset.orientation)
                                    for l in range(D)])                       # (D, 3, 3)
        # Depth levels for batched FK: level k holds every joint whose parent
        # chain has k joints; within the default hand these are the finger rows.
        depth = np.zeros(D, dtype=int)
        for j in range(D):
            p = self.parent_links[j]
            depth[j] = 0 if p == 0 else depth[p - 1] + 1
        self.levels = [np.flatnonzero(depth == k) for k in range(depth.max() + 1)]

        # Rodrigues terms are constant per joint (axes are fixed); only the
        # cos/sin factors vary, so cache K and the axis outer product.
        axes = self.joint_axes
        K = np.zeros((D, 3, 3))
        K[:, 0, 1], K[:, 0, 2] = -axes[:, 2], axes[:, 1]
        K[:, 1, 0], K[:, 1, 2] = axes[:, 2], -axes[:, 0]
        K[:, 2, 0], K[:, 2, 1] = -axes[:, 1], axes[:, 0]
        self.axis_K = K
        self.axis_outer = axes[:, :, None] * axes[:, None, :]

        self.fingertip_links = np.array([l for l, lk in enumerate(self.links) if lk.is_fingertip])
        # Flattened sphere arrays for vectorized contact queries.
        owners, centers, radii = [], [], []
        for l, lk in enumerate(self.links):
            for c, r in zip(lk.sphere_centers, lk.sphere_radii):
                owners.append(l)
                centers.append(c)
                radii.append(r)
        self.sphere_link = np.array(owners)
        self.sphere_local = np.stack(centers)
        self.sphere_radius = np.array(radii)
        # finger id per link: -1 for palm, else index of the depth-0 ancestor.
        finger = np.full(self.num_links, -1, dtype=int)
        root_of_joint = np.zeros(D, dtype=int)
        for j in range(D):
            p = self.parent_links[j]
            root_of_joint[j] = j if p == 0 else root_of_joint[p - 1]
        for j in range(D):
            finger[j + 1] = np.flatnonzero(self.levels[0] == root_of_joint[j])[0]
        self.link_finger = finger
        self.num_fingers = len(self.levels[0])
        # Self-contact candidate pairs: spheres from different fingers, or a
        # finger sphere vs the palm (skipping each finger's own root link and
        # any pair the description filters out as permanently adjacent).
        name_of = [lk.name for lk in self.links]
        filtered = {frozenset(p) for p in self.no_collide}
        pairs = []
        for a in range(len(self.sphere_link)):
            for b in range(a + 1, len(self.sphere_link)):
                la, lb = self.sphere_link[a], self.sphere_link[b]
                fa, fb = finger[la], finger[lb]
                if fa == fb:
                    continue
                if (fa == -1 and lb - 1 in self.levels[0]) or \
                   (fb == -1 and la - 1 in self.levels[0]):
                    continue  # root phalanx starts flush against the palm
                if frozenset((name_of[la], name_of[lb])) in filtered:
                    continue
                pairs.append((a, b))
        self.self_pairs = np.array(pairs, dtype=int).reshape(-1, 2)

    # -- joint helpers -------------------------------------------------

    def clamp(self, q) -> np.ndarray:
        return np.clip(q, self.joint_limits[:, 0], self.joint_limits[:, 1])

    def check_dof(self, q, what="joint vector"):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise DimensionError(f"{what} has shape {q.shape}, expected ({self.dof},)")
        return q

    def joint_finger(self) -> np.ndarray:
        """Finger index for every joint."""
        return self.link_finger[1:]

    # -- serialization -------------------------------------------------

    @staticmethod
    def load(path) -> "HandDescription":
        raw = json.loads(Path(path).read_text())
        joints = [JointSpec(axis=j["axis"], limits=tuple(j["limits"]),
                            parent_link=j["parent_link"]) for j in raw["joints"]]
        links = []
        for lk in raw["links"]:
            off = lk.get("offset", {})
            links.append(LinkSpec(
                name=lk["name"],
                parent_joint=lk.get("parent_joint"),
                offset=Pose(off.get("position", [0, 0, 0]),
                            off.get("orientation", [1, 0, 0, 0])),
                sphere_centers=[s["center"] for s in lk["spheres"]],
                sphere_radii=[s["radius"] for s in lk["spheres"]],
                is_fingertip=lk.get("is_fingertip", False),
                is_palm=lk.get("is_palm", False),
            ))
        pd = raw.get("pd_gains", {})
        return HandDescription(raw["name"], joints, links,
                               kp=pd.get("kp"), kd=pd.get("kd"),
                               no_collide=raw.get("no_collide"))

    def dump(self, path):
        doc = {
            "name": self.name,
            "joints": [{"axis": j.axis.tolist(), "limits": list(j.limits),
                        "parent_link": int(j.parent_link)} for j in self.joints],
            "links": [{
                "name": lk.name,
                **({"parent_joint": int(lk.parent_joint)} if lk.parent_joint is not None else {}),
                "offset": {"position": lk.offset.position.tolist(),
                           "orientation": lk.offset.orientation.tolist()},
                "spheres": [{"center": c.tolist(), "radius": float(r)}
                            for c, r in zip(lk.sphere_centers, lk.sphere_radii)],
                "is_fingertip": lk.is_fingertip,
                "is_palm": lk.is_palm,
            } for lk in self.links],
            "pd_gains": {"kp": self.kp.tolist(), "kd": self.kd.tolist()},
            "no_collide": [list(p) for p in self.no_collide],
        }
        Path(path).write_text(json.dumps(doc, indent=1))


@dataclass
class HandState:
    q: np.ndarray
    dq: np.ndarray
    wrist: Pose
    wrist_lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wrist_ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_target_q: np.ndarray | None = None

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).copy()
        self.dq = np.asarray(self.dq, dtype=float).copy()
        if self.prev_target_q is None:
            self.prev_target_q = self.q.copy()

    def copy(self) -> "HandState":
        return HandState(self.q, self.dq, self.wrist.copy(),
                         self.wrist_lin_vel.copy(), self.wrist_ang_vel.copy(),
                         self.prev_target_q.copy())


# -- forward kinematics ----------------------------------------------------


def forward_kinematics(desc: HandDescription, q, wrist: Pose) -> list[Pose]:
    """World pose of every link for joint vector q and the given wrist pose."""
    q = desc.check_dof(q)
    R, t = fk_arrays(desc, q, wrist)
    return [Pose(t[l], mat_to_quat(R[l])) for l in range(desc.num_links)]


def fk_arrays(desc: HandDescription, q, wrist: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Rotation matrices (L, 3, 3) and positions (L, 3), batched per depth level."""
    L = desc.num_links
    R = np.empty((L, 3, 3))
    t = np.empty((L, 3))
    R[0] = quat_to_mat(wrist.orientation)
    t[0] = wrist.position
    eye = np.eye(3)
    for level in desc.levels:
        links = level + 1
        parents = desc.parent_links[level]
        Rp, tp = R[parents], t[parents]
        c = np.cos(q[level])[:, None, None]
        s = np.sin(q[level])[:, None, None]
        Rj = c * eye + s * desc.axis_K[level] + (1 - c) * desc.axis_outer[level]
        R_off = desc.offset_rot[level]
        t_off = desc.offset_pos[level]
        t[links] = tp + np.einsum("nij,nj->ni", Rp, t_off)
        R[links] = np.einsum("nij,njk,nkl->nil", Rp, R_off, Rj)
    return R, t


def sphere_centers_world(desc: HandDescription, R, t) -> np.ndarray:
    """World centers of all collision spheres given fk_arrays output."""
    own = desc.sphere_link
    return t[own] + np.einsum("nij,nj->ni", R[own], desc.sphere_local)


# -- action application ----------------------------------------------------


@dataclass
class ActionTargets:
    wrist: Pose
    q: np.ndarray


def apply_action(desc: HandDescription, state: HandState, delta_pos, delta_quat,
                 delta_q, max_delta_q: float | None = None,
                 max_delta_pos: float | None = None,
                 max_delta_rot: float | None = None) -> ActionTargets:
    """Accumulate predicted deltas onto the current state to form targets.

    The four rotation values parameterize a deviation from the identity
    quaternion (so an all-zero action is a null rotation and small values
    mean small rotations); the resulting unit delta pre-multiplies the
    current orientation. Joint targets are clamped to limits.
    """
    delta_q = desc.check_dof(delta_q, "joint delta")
    delta_pos = np.asarray(delta_pos, dtype=float).reshape(3)
    delta_quat = np.asarray(delta_quat, dtype=float).reshape(4)
    if not (np.isfinite(delta_q).all() and np.isfinite(delta_pos).all()
            and np.isfinite(delta_quat).all()):
        raise ValueError("action contains non-finite values")
    if max_delta_q is not None:
        delta_q = np.clip(delta_q, -max_delta_q, max_delta_q)
    if max_delta_pos is not None:
        delta_pos = np.clip(delta_pos, -max_delta_pos, max_delta_pos)
    dq = quat_normalize(delta_quat + np.array([1.0, 0.0, 0.0, 0.0]))
    if max_delta_rot is not None:
        rv = quat_to_rotvec(dq)
        angle = np.linalg.norm(rv)
        if angle > max_delta_rot:
            dq = quat_from_axis_angle(rv / angle, max_delta_rot)
    q_target = desc.clamp(state.q + delta_q)
    wrist_target = Pose(state.wrist.position + delta_pos,
                        quat_normalize(quat_mul(dq, state.wrist.orientation)))
    return ActionTargets(wrist=wrist_target, q=q_target)


# -- low-level tracking ----------------------------------------------------


def pd_joint_step(desc: HandDescription, q, dq, q_target, dt: float):
    """Semi-implicit Euler update of unit-inertia joints under PD torque."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    acc = desc.kp * (q_target - q) - desc.kd * dq
    dq_next = dq + acc * dt
    q_next = q + dq_next * dt
    clamped = desc.clamp(q_next)
    dq_next = np.where(q_next == clamped, dq_next, 0.0)  # kill velocity at the stop
    return clamped, dq_next


def wrist_servo_step(state: HandState, target: Pose, dt: float,
                     zeta: float = 1.0, omega_n: float = 20.0) -> HandState:
    """Damped pose servo: acceleration = -2*zeta*omega*vel - omega^2*error.

    Position and orientation are driven independently; the orientation
    error is the rotation vector of the relative quaternion.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos_err = state.wrist.position - target.position
    rel = quat_mul(state.wrist.orientation, quat_conj(target.orientation))
    rot_err = quat_to_rotvec(quat_normalize(rel))

    lin_acc = -2.0 * zeta * omega_n * state.wrist_lin_vel - omega_n ** 2 * pos_err
    ang_acc = -2.0 * zeta * omega_n * state.wrist_ang_vel - omega_n ** 2 * rot_err

    v = state.wrist_lin_vel + lin_acc * dt
    w = state.wrist_ang_vel + ang_acc * dt
    pos = state.wrist.position + v * dt
    dq = quat_from_axis_angle(w / max(np.linalg.norm(w), 1e-12),
                              np.linalg.norm(w) * dt) if np.linalg.norm(w) > 1e-12 \
        else np.array([1.0, 0.0, 0.0, 0.0])
    ori = quat_normalize(quat_mul(dq, state.wrist.orientation))
    out = state.copy()
    out.wrist = Pose(pos, ori)
    out.wrist_lin_vel = v
    out.wrist_ang_vel = w
    return out


def palm_normal(wrist: Pose) -> np.ndarray:
    """World direction the palm surface faces (local +z)."""
    return quat_rotate(wrist.orientation, np.array([0.0, 0.0, 1.0]))
