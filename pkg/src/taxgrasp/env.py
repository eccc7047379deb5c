"""Kinematic grasp environment: PD-tracked hand over a penalty-contact
rigid-body object on a table, with the eight-direction reset protocol,
success latching, and fixed-layout observation assembly.

The hand is kinematic (contacts exert no reaction on it); the object is
a full 6-DoF rigid body integrated with semi-implicit Euler under
gravity, spring-damper normal forces, and Coulomb-capped viscous
friction.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import reward as rw
from .errors import SimulationError
from .features import (BpsConfig, PointCloud, bps_encode, link_distances,
                       object_center, partial_view, table_distance,
                       to_wrist_frame, wrist_object_displacement)
from .hand import (HandDescription, HandState, apply_action, fk_arrays,
                   palm_normal, pd_joint_step, sphere_centers_world,
                   wrist_servo_step)
from .shapes import Shape
from .taxonomy import (GraspCommand, GraspTemplate, TemplateLibrary,
                       command_feature, orientation_for_direction, yaw_direction)
from .transforms import Pose, quat_from_axis_angle, quat_mul, quat_normalize

OBS_LAYOUT_VERSION = "obs-v1"

CONTACT_OBJECT = "object"
CONTACT_TABLE = "table"
CONTACT_SELF = "self"


def _cross(a, b) -> np.ndarray:
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@dataclass
class EnvConfig:
    dt: float = 1.0 / 60.0
    substeps: int = 4
    episode_seconds: float = 6.0
    table_height: float = 0.0
    gravity: float = 9.81
    # reset protocol
    standoff: float = 0.25
    elevation_deg: float = 30.0
    jitter: float = 0.02
    max_reset_attempts: int = 20
    # contact model
    contact_stiffness: float = 5000.0   # N/m
    contact_damping: float = 80.0       # N·s/m, applied on the signed normal rate
    friction_mu: float = 0.8
    friction_viscous: float = 120.0     # N·s/m, capped by mu * normal force
    force_cap: float = 30.0             # per-contact clamp, keeps springs stable
    # action bounds (per control step)
    max_delta_q: float = 0.05           # rad
    max_delta_pos: float = 0.01         # m
    max_delta_rot: float = 0.10         # rad
    # success criterion
    success_height: float = 0.05
    success_hold: float = 3.0
    # sensing
    cloud_points: int = 2000            # dense samples fed to the virtual camera
    view_points: int = 256              # partial-view subsample kept per trial
    camera_offset: tuple = (0.35, 0.25, 0.40)
    bps_enabled: bool = True

    def validate(self) -> list[str]:
        errors = []
        if self.dt <= 0:
            errors.append("env.dt must be positive")
        if self.substeps < 1:
            errors.append("env.substeps must be >= 1")
        if self.episode_seconds <= 0:
            errors.append("env.episode_seconds must be positive")
        if self.standoff <= 0:
            errors.append("env.standoff must be positive")
        for name in ("contact_stiffness", "contact_damping", "friction_mu",
                     "friction_viscous", "force_cap", "jitter"):
            if getattr(self, name) < 0:
                errors.append(f"env.{name} must be >= 0")
        if self.success_height <= 0 or self.success_hold <= 0:
            errors.append("env.success thresholds must be positive")
        return errors

    def to_dict(self) -> dict:
        d = asdict(self)
        d["camera_offset"] = list(self.camera_offset)
        return d

    @staticmethod
    def from_dict(doc: dict) -> "EnvConfig":
        doc = dict(doc)
        if "camera_offset" in doc:
            doc["camera_offset"] = tuple(doc["camera_offset"])
        return EnvConfig(**doc)

    @property
    def steps_per_episode(self) -> int:
        return int(round(self.episode_seconds / self.dt))


@dataclass
class SceneObject:
    shape: Shape
    pose: Pose
    lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: float = 0.10
    inertia: np.ndarray | None = None   # diagonal, body frame
    rest_height: float = 0.0            # initial z of pose

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("object mass must be positive")
        if self.inertia is None:
            self.inertia = default_inertia(self.shape, self.mass)
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3)
        if np.any(self.inertia <= 0):
            raise ValueError("inertia entries must be positive")

    def copy(self) -> "SceneObject":
        return SceneObject(self.shape, self.pose.copy(), self.lin_vel.copy(),
                           self.ang_vel.copy(), self.mass, self.inertia.copy(),
                           self.rest_height)


def default_inertia(shape: Shape, mass: float) -> np.ndarray:
    from .shapes import Box, Sphere
    if isinstance(shape, Sphere):
        i = 0.4 * mass * shape.radius ** 2
        return np.array([i, i, i])
    if isinstance(shape, Box):
        s = 2.0 * shape.half
        return (mass / 12.0) * np.array([s[1] ** 2 + s[2] ** 2,
                                         s[0] ** 2 + s[2] ** 2,
                                         s[0] ** 2 + s[1] ** 2])
    r = shape.bounding_radius()
    i = 0.4 * mass * r ** 2
    return np.array([i, i, i])


@dataclass
class Contact:
    link: int                   # hand link index
    point: np.ndarray           # world
    normal: np.ndarray          # world, unit, object-outward (or surface-outward)
    impulse: float              # normal impulse, N*s per control step, >= 0
    impulse_vec: np.ndarray     # full impulse on the object, N*s
    kind: str                   # object | table | self


@dataclass
class EnvState:
    hand: HandState
    obj: SceneObject
    command: GraspCommand
    template: GraspTemplate
    contacts: list = field(default_factory=list)
    contact_flag: np.ndarray | None = None      # (L,) 1 iff object contact
    contact_impulse: np.ndarray | None = None   # (L,) object-normal impulse sums
    unintended_flag: np.ndarray | None = None   # (L,) table or self contact
    unintended_impulse: np.ndarray | None = None
    support_impulse: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_action: np.ndarray | None = None
    time: float = 0.0
    step_index: int = 0
    obj_xy0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cloud_local: np.ndarray | None = None       # object-frame partial view
    cloud_normals_local: np.ndarray | None = None
    above_since: float | None = None
    success: bool = False                        # latched
    hold_window: tuple | None = None             # (start step, end step) of the hold
    aborted: bool = False
    # per-step caches filled by the env (kinematics and features)
    link_R: np.ndarray | None = None
    link_t: np.ndarray | None = None
    sphere_centers: np.ndarray | None = None
    features: dict = field(default_factory=dict)


@dataclass
class StepResult:
    state: EnvState
    breakdown: rw.RewardBreakdown
    done: bool


def observation_layout(desc: HandDescription, bps_size: int,
                       bps_enabled: bool = True) -> list[tuple[str, int]]:
    D, L = desc.dof, desc.num_links
    layout = [
        ("q", D), ("target_error", D), ("wrist_lin_vel", 3), ("wrist_ang_vel", 3),
        ("obj_lin_vel", 3), ("obj_ang_vel", 3), ("contact_flag", L),
        ("contact_impulse", L),
        ("command_q_delta", D), ("command_mask", L), ("command_orientation", 4),
        ("x_rel", 3), ("d_hand", 3 * L), ("d_table", L),
    ]
    if bps_enabled:
        layout.append(("bps", bps_size))
    return layout


def observation_size(desc: HandDescription, bps_size: int,
                     bps_enabled: bool = True) -> int:
    return sum(n for _, n in observation_layout(desc, bps_size, bps_enabled))


class GraspEnv:
    """One grasp trial: deterministic given (object, command, seed, actions)."""

    def __init__(self, desc: HandDescription, library: TemplateLibrary,
                 env_cfg: EnvConfig, reward_cfg: rw.RewardConfig,
                 bps: BpsConfig, shape: Shape, object_mass: float = 0.10,
                 object_seed: int = 0):
        self.desc = desc
        self.library = library
        self.cfg = env_cfg
        self.reward_cfg = reward_cfg
        self.bps = bps
        self.shape = shape
        self.object_mass = object_mass
        dense_pts, dense_nrm = shape.surface_samples(env_cfg.cloud_points,
                                                     seed=object_seed)
        self._dense_points = dense_pts
        self._dense_normals = dense_nrm
        self._min_z = float(dense_pts[:, 2].min())
        self.action_dim = 7 + desc.dof
        self._joint_finger = desc.joint_finger()

    # -- reset ---------------------------------------------------------------

    def object_rest_pose(self) -> Pose:
        z = self.cfg.table_height - self._min_z
        return Pose([0.0, 0.0, z])

    def _settle_object(self, obj: SceneObject, max_seconds: float = 1.0):
        """Let the object sink to spring equilibrium before the trial starts."""
        dt_sub = self.cfg.dt / self.cfg.substeps
        for _ in range(int(max_seconds / dt_sub)):
            force = np.array([0.0, 0.0, -self.cfg.gravity * obj.mass])
            torque = np.zeros(3)
            self._object_table_forces(obj, dt_sub, force, torque)
            obj.lin_vel = obj.lin_vel + (force / obj.mass) * dt_sub
            obj.pose.position = obj.pose.position + obj.lin_vel * dt_sub
            if (np.abs(obj.lin_vel) < 1e-7).all() and abs(force[2]) < 1e-6:
                break
        obj.lin_vel[:] = 0.0
        obj.ang_vel[:] = 0.0

    def reset(self, command: GraspCommand, direction_index: int,
              rng: np.random.Generator) -> EnvState:
        if not 0 <= direction_index < 8:
            raise ValueError("direction_index must lie in 0..7")
        template = self.library[command.taxonomy]
        obj_pose = self.object_rest_pose()
        obj = SceneObject(self.shape, obj_pose, mass=self.object_mass,
                          rest_height=obj_pose.position[2])
        self._settle_object(obj)
        obj.rest_height = obj.pose.position[2]

        target_center = obj_pose.position + np.array(
            [0.0, 0.0, max(-self._min_z * 0.0, 0.0)])
        elev = np.deg2rad(self.cfg.elevation_deg)
        d = yaw_direction(direction_index)
        offset = -d * np.cos(elev) + np.array([0.0, 0.0, np.sin(elev)])

        for attempt in range(self.cfg.max_reset_attempts):
            jitter = rng.uniform(-self.cfg.jitter, self.cfg.jitter, size=3) \
                if self.cfg.jitter > 0 else np.zeros(3)
            wrist_pos = target_center + self.cfg.standoff * offset + jitter
            wrist = Pose(wrist_pos, command.wrist_orientation.copy())
            hand = HandState(q=np.zeros(self.desc.dof), dq=np.zeros(self.desc.dof),
                             wrist=wrist)
            if not self._initial_penetration(hand, obj):
                break
        else:
            raise SimulationError(
                "could not find a penetration-free initial wrist pose")

        state = EnvState(hand=hand, obj=obj, command=command, template=template,
                         prev_action=np.zeros(self.action_dim),
                         obj_xy0=obj.pose.position[:2].copy())
        self._attach_cloud(state, rng)
        self._zero_contacts(state)
        state.link_R, state.link_t = fk_arrays(self.desc, hand.q, hand.wrist)
        state.sphere_centers = sphere_centers_world(self.desc, state.link_R,
                                                    state.link_t)
        self._compute_features(state)
        return state

    def _initial_penetration(self, hand: HandState, obj: SceneObject) -> bool:
        R, t = fk_arrays(self.desc, hand.q, hand.wrist)
        centers = sphere_centers_world(self.desc, R, t)
        local = obj.pose.inverse().apply(centers)
        q = obj.shape.query(local)
        if np.any(q.distance < self.desc.sphere_radius):
            return True
        below = centers[:, 2] - self.desc.sphere_radius < self.cfg.table_height
        return bool(below.any())

    def _attach_cloud(self, state: EnvState, rng: np.random.Generator):
        world_pts = state.obj.pose.apply(self._dense_points)
        world_nrm = self._dense_normals @ state.obj.pose.rotation().T
        cam = Pose(state.obj.pose.position + np.asarray(self.cfg.camera_offset))
        view = partial_view(world_pts, world_nrm, cam)
        pts, nrm = view.points, view.normals
        if len(pts) > self.cfg.view_points:
            keep = np.linspace(0, len(pts) - 1, self.cfg.view_points).astype(int)
            pts, nrm = pts[keep], nrm[keep]
        inv = state.obj.pose.inverse()
        state.cloud_local = inv.apply(pts)
        state.cloud_normals_local = nrm @ inv.rotation().T

    def _zero_contacts(self, state: EnvState):
        L = self.desc.num_links
        state.contacts = []
        state.contact_flag = np.zeros(L)
        state.contact_impulse = np.zeros(L)
        state.unintended_flag = np.zeros(L)
        state.unintended_impulse = np.zeros(L)
        state.support_impulse = np.zeros(3)

    # -- cloud helpers ---------------------------------------------------------

    def world_cloud(self, state: EnvState) -> PointCloud:
        pts = state.obj.pose.apply(state.cloud_local)
        nrm = state.cloud_normals_local @ state.obj.pose.rotation().T
        return PointCloud(pts, nrm, frame="world")

    # -- stepping ---------------------------------------------------------------

    def step(self, state: EnvState, action) -> StepResult:
        action = np.asarray(action, dtype=float).reshape(self.action_dim)
        if not np.isfinite(action).all():
            raise SimulationError("action contains non-finite values")
        cfg = self.cfg
        targets = apply_action(self.desc, state.hand, action[:3], action[3:7],
                               action[7:], max_delta_q=cfg.max_delta_q,
                               max_delta_pos=cfg.max_delta_pos,
                               max_delta_rot=cfg.max_delta_rot)

        hand = state.hand.copy()
        obj = state.obj.copy()
        dt_sub = cfg.dt / cfg.substeps
        L = self.desc.num_links

        imp_obj = np.zeros(L)            # normal impulse per link, object kind
        imp_obj_vec = np.zeros((L, 3))
        imp_un = np.zeros(L)             # table + self pseudo-impulse per link
        flag_un = np.zeros(L)
        normal_obj = np.zeros((L, 3))
        point_obj = np.zeros((L, 3))
        support_imp = np.zeros(3)
        table_contacts: list[tuple[int, np.ndarray]] = []
        self_contacts: list[tuple[int, int]] = []

        prev_centers = state.sphere_centers
        if prev_centers is None:
            R, t = fk_arrays(self.desc, hand.q, hand.wrist)
            prev_centers = sphere_centers_world(self.desc, R, t)
        R = t = None

        for _ in range(cfg.substeps):
            hand.q, hand.dq = pd_joint_step(self.desc, hand.q, hand.dq,
                                            targets.q, dt_sub)
            hand = wrist_servo_step(hand, targets.wrist, dt_sub)
            R, t = fk_arrays(self.desc, hand.q, hand.wrist)
            centers = sphere_centers_world(self.desc, R, t)
            sphere_vel = (centers - prev_centers) / dt_sub
            prev_centers = centers

            force = np.array([0.0, 0.0, -cfg.gravity * obj.mass])
            torque = np.zeros(3)

            # hand spheres vs object
            local = obj.pose.inverse().apply(centers)
            qres = obj.shape.query(local)
            pen = self.desc.sphere_radius - qres.distance
            hits = np.flatnonzero(pen > 0.0)
            Rw = obj.pose.rotation()
            for s in hits:
                link = self.desc.sphere_link[s]
                n = Rw @ qres.normal[s]                 # object-outward, world
                p = obj.pose.apply(qres.point[s])
                arm = p - obj.pose.position
                v_obj_pt = obj.lin_vel + _cross(obj.ang_vel, arm)
                v_rel = sphere_vel[s] - v_obj_pt
                # signed Kelvin-Voigt damping, clamped so contact never pulls
                fn = (cfg.contact_stiffness * pen[s]
                      - cfg.contact_damping * float(v_rel @ n))
                fn = min(max(fn, 0.0), cfg.force_cap)
                slip = (v_rel @ n) * n - v_rel           # object slip vs hand
                slip_n = float(np.sqrt(slip @ slip))
                ft = 0.0
                if slip_n > 1e-9:
                    mag = min(cfg.friction_viscous * slip_n, cfg.friction_mu * fn)
                    ft = -slip / slip_n * mag
                f_total = -fn * n + ft
                force += f_total
                torque += _cross(arm, f_total)
                imp_obj[link] += fn * dt_sub
                imp_obj_vec[link] += f_total * dt_sub
                normal_obj[link] = n
                point_obj[link] = p

            # object vs table
            support_imp += self._object_table_forces(obj, dt_sub, force, torque)

            # integrate the object (inertia inverse rotated to world frame)
            obj.lin_vel = obj.lin_vel + (force / obj.mass) * dt_sub
            Iw_omega = Rw @ (obj.inertia * (Rw.T @ obj.ang_vel))
            gyro = _cross(obj.ang_vel, Iw_omega)
            ang_acc = Rw @ ((Rw.T @ (torque - gyro)) / obj.inertia)
            obj.ang_vel = obj.ang_vel + ang_acc * dt_sub
            obj.pose.position = obj.pose.position + obj.lin_vel * dt_sub
            w_norm = float(np.sqrt(obj.ang_vel @ obj.ang_vel))
            if w_norm > 1e-12:
                dq = quat_from_axis_angle(obj.ang_vel / w_norm, w_norm * dt_sub)
                obj.pose.orientation = quat_normalize(quat_mul(dq, obj.pose.orientation))

            # hand vs table and hand self-contacts (penalty signals only)
            below = centers[:, 2] - self.desc.sphere_radius - cfg.table_height
            for s in np.flatnonzero(below < 0.0):
                link = self.desc.sphere_link[s]
                fn = min(cfg.contact_stiffness * (-below[s]), cfg.force_cap)
                imp_un[link] += fn * dt_sub
                flag_un[link] = 1.0
                table_contacts.append((link, centers[s].copy()))
            if len(self.desc.self_pairs):
                a = self.desc.self_pairs[:, 0]
                b = self.desc.self_pairs[:, 1]
                diff = centers[a] - centers[b]
                gap = (np.sqrt(np.einsum("ij,ij->i", diff, diff))
                       - self.desc.sphere_radius[a] - self.desc.sphere_radius[b])
                for k in np.flatnonzero(gap < 0.0):
                    la, lb = self.desc.sphere_link[a[k]], self.desc.sphere_link[b[k]]
                    fn = min(cfg.contact_stiffness * (-gap[k]), cfg.force_cap)
                    for link in (la, lb):
                        imp_un[link] += fn * dt_sub
                        flag_un[link] = 1.0
                    self_contacts.append((la, lb))

        if not (np.isfinite(obj.pose.position).all()
                and np.isfinite(obj.lin_vel).all()
                and np.isfinite(hand.q).all()):
            state.aborted = True
            raise SimulationError("simulation produced a non-finite state")

        hand.prev_target_q = targets.q.copy()

        nxt = EnvState(hand=hand, obj=obj, command=state.command,
                       template=state.template,
                       prev_action=action.copy(),
                       time=state.time + cfg.dt,
                       step_index=state.step_index + 1,
                       obj_xy0=state.obj_xy0.copy(),
                       cloud_local=state.cloud_local,
                       cloud_normals_local=state.cloud_normals_local,
                       above_since=state.above_since,
                       success=state.success,
                       hold_window=state.hold_window)
        nxt.contact_flag = (imp_obj > 0.0).astype(float)
        nxt.contact_impulse = imp_obj
        nxt.unintended_flag = flag_un
        nxt.unintended_impulse = imp_un
        nxt.support_impulse = support_imp
        nxt.link_R, nxt.link_t = R, t
        nxt.sphere_centers = prev_centers
        nxt.contacts = self._build_contacts(nxt, imp_obj, imp_obj_vec, normal_obj,
                                            point_obj, imp_un, table_contacts,
                                            self_contacts)
        self._update_success(nxt)
        self._compute_features(nxt)
        breakdown = self._compute_reward(state, nxt, action)
        done = nxt.success or nxt.step_index >= self.cfg.steps_per_episode
        return StepResult(state=nxt, breakdown=breakdown, done=done)

    def _object_table_forces(self, obj: SceneObject, dt_sub, force, torque):
        """Supports the object on the plane; returns the impulse it applied."""
        cfg = self.cfg
        local_pts = self._support_points(obj)
        world = obj.pose.apply(local_pts)
        pen = cfg.table_height - world[:, 2]
        hits = np.flatnonzero(pen > 0.0)
        impulse = np.zeros(3)
        for k in hits:
            p = world[k]
            arm = p - obj.pose.position
            v_pt = obj.lin_vel + _cross(obj.ang_vel, arm)
            fn = cfg.contact_stiffness * pen[k] - cfg.contact_damping * v_pt[2]
            fn = min(max(fn, 0.0), cfg.force_cap)
            slip = np.array([v_pt[0], v_pt[1], 0.0])
            slip_n = float(np.sqrt(v_pt[0] ** 2 + v_pt[1] ** 2))
            ft = 0.0
            if slip_n > 1e-9:
                mag = min(cfg.friction_viscous * slip_n, cfg.friction_mu * fn)
                ft = -slip / slip_n * mag
            f_total = np.array([0.0, 0.0, fn]) + ft
            force += f_total
            torque += _cross(arm, f_total)
            impulse += f_total * dt_sub
        return impulse

    def _support_points(self, obj: SceneObject) -> np.ndarray:
        from .shapes import Box, Sphere
        if isinstance(obj.shape, Sphere):
            # lowest point of the sphere in world, expressed locally
            Rw = obj.pose.rotation()
            down = Rw.T @ np.array([0.0, 0.0, -1.0])
            return (obj.shape.radius * down)[None, :]
        if isinstance(obj.shape, Box):
            h = obj.shape.half
            corners = np.array([[sx * h[0], sy * h[1], sz * h[2]]
                                for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
            return corners
        pts = self._dense_points
        world_z = (obj.pose.apply(pts))[:, 2]
        idx = np.argsort(world_z)[:8]
        return pts[idx]

    def _build_contacts(self, state, imp_obj, imp_obj_vec, normal_obj, point_obj,
                        imp_un, table_contacts, self_contacts) -> list:
        contacts = []
        for l in np.flatnonzero(imp_obj > 0.0):
            contacts.append(Contact(link=int(l), point=point_obj[l].copy(),
                                    normal=normal_obj[l].copy(),
                                    impulse=float(imp_obj[l]),
                                    impulse_vec=imp_obj_vec[l].copy(),
                                    kind=CONTACT_OBJECT))
        seen = set()
        for link, point in table_contacts:
            if link in seen:
                continue
            seen.add(link)
            contacts.append(Contact(link=int(link), point=point,
                                    normal=np.array([0.0, 0.0, 1.0]),
                                    impulse=float(imp_un[link]),
                                    impulse_vec=np.zeros(3), kind=CONTACT_TABLE))
        seen_pairs = set()
        for la, lb in self_contacts:
            if (la, lb) in seen_pairs:
                continue
            seen_pairs.add((la, lb))
            contacts.append(Contact(link=int(la), point=np.zeros(3),
                                    normal=np.array([0.0, 0.0, 1.0]),
                                    impulse=float(imp_un[la]),
                                    impulse_vec=np.zeros(3), kind=CONTACT_SELF))
        return contacts

    def _update_success(self, state: EnvState):
        cfg = self.cfg
        lifted = state.obj.pose.position[2] >= state.obj.rest_height + cfg.success_height
        if state.success:
            return
        if lifted:
            if state.above_since is None:
                state.above_since = state.time
            if state.time - state.above_since >= cfg.success_hold:
                state.success = True
                start = int(round(state.above_since / cfg.dt))
                state.hold_window = (start, state.step_index)
        else:
            state.above_since = None

    # -- features and reward -----------------------------------------------------

    def _compute_features(self, state: EnvState):
        """Geometric features for the current state, shared by the reward
        and the observation."""
        cloud = self.world_cloud(state)
        d_hand, dist = link_distances(self.desc, state.link_t, state.link_R, cloud)
        feats = {
            "x_rel": wrist_object_displacement(state.hand.wrist, cloud),
            "d_hand": d_hand,
            "link_dist": dist,
            "d_table": table_distance(self.desc, state.link_t, state.link_R,
                                      self.cfg.table_height),
        }
        if self.cfg.bps_enabled:
            wrist_cloud = to_wrist_frame(cloud, state.hand.wrist)
            feats["bps"] = bps_encode(wrist_cloud, self.bps)
        state.features = feats

    def _compute_reward(self, prev: EnvState, state: EnvState,
                        action) -> rw.RewardBreakdown:
        cfg = self.reward_cfg
        template = state.template
        R = state.link_R
        b = rw.RewardBreakdown()

        x_rel = state.features["x_rel"]
        b.r_h = rw.hand_reward(x_rel, state.features["link_dist"], template.mask, cfg)

        d_w = palm_normal(state.hand.wrist)
        norm = np.linalg.norm(x_rel)
        d_t = x_rel / norm if norm > 1e-9 else d_w
        prev_action = prev.prev_action if prev.prev_action is not None \
            else np.zeros_like(action)
        b.alpha_dir, b.alpha_vel_wrist, b.alpha_act, b.alpha_h = \
            rw.approach_coefficients(d_w, d_t, state.hand.wrist_lin_vel,
                                     state.hand.wrist_ang_vel, action,
                                     prev_action, cfg)

        n_ref_world = np.einsum("nij,nj->ni", R, template.contact_normals)
        b.r_o = rw.object_reward(state.contact_flag, state.contact_impulse,
                                 self._contact_normals(state), n_ref_world,
                                 template.mask, cfg)
        xy_off = state.obj.pose.position[:2] - state.obj_xy0
        b.alpha_vel_obj, b.alpha_xy, b.alpha_obj = rw.object_stability(
            state.obj.lin_vel, state.obj.ang_vel, xy_off, cfg)

        active_j, resting_j = self.mimic_partition(template)
        b.l_mimic, b.alpha_mimic = rw.mimic(state.hand.q, template.q_ref,
                                            active_j, resting_j, cfg)
        b.r_pen = rw.penalty(state.contact_flag, state.contact_impulse,
                             state.unintended_flag, state.unintended_impulse,
                             template.mask, cfg)
        rw.composite(b, cfg)
        return b

    def _contact_normals(self, state: EnvState) -> np.ndarray:
        n = np.zeros((self.desc.num_links, 3))
        for c in state.contacts:
            if c.kind == CONTACT_OBJECT:
                n[c.link] = c.normal
        return n

    def mimic_partition(self, template: GraspTemplate):
        """Finger-level split of joints into engaged and resting sets."""
        engaged_fingers = {int(self.desc.link_finger[l])
                           for l in template.active_links()
                           if self.desc.link_finger[l] >= 0}
        if not engaged_fingers:
            raise ValueError(f"template {template.name} engages no finger")
        active = [j for j in range(self.desc.dof)
                  if int(self._joint_finger[j]) in engaged_fingers]
        resting = [j for j in range(self.desc.dof)
                   if int(self._joint_finger[j]) not in engaged_fingers]
        return np.array(active, dtype=int), np.array(resting, dtype=int)

    # -- observation -------------------------------------------------------------

    def build_observation(self, state: EnvState) -> np.ndarray:
        if not state.features:
            self._compute_features(state)
        feats = state.features
        parts = [
            state.hand.q,
            state.hand.prev_target_q - state.hand.q,
            state.hand.wrist_lin_vel,
            state.hand.wrist_ang_vel,
            state.obj.lin_vel,
            state.obj.ang_vel,
            state.contact_flag,
            state.contact_impulse,
            command_feature(state.template, state.hand.q,
                            state.command.wrist_orientation),
            feats["x_rel"],
            feats["d_hand"].reshape(-1),
            feats["d_table"],
        ]
        if self.cfg.bps_enabled:
            parts.append(feats["bps"])
        return np.concatenate(parts)

    @property
    def observation_dim(self) -> int:
        return observation_size(self.desc, self.bps.size, self.cfg.bps_enabled)


# -- standalone contact detection (same model the stepper uses) ----------------


def detect_contacts(desc: HandDescription, link_R, link_t, shape: Shape,
                    obj_pose: Pose, table_height: float, dt: float) -> list[Contact]:
    """Penetration contacts for a static snapshot: sphere-object,
    sphere-plane, and sphere-sphere (self), with spring impulses."""
    k = 5000.0
    centers = sphere_centers_world(desc, link_R, link_t)
    contacts = []
    local = obj_pose.inverse().apply(centers)
    q = shape.query(local)
    pen = desc.sphere_radius - q.distance
    Rw = obj_pose.rotation()
    for s in np.flatnonzero(pen > 0.0):
        n = Rw @ q.normal[s]
        contacts.append(Contact(link=int(desc.sphere_link[s]),
                                point=obj_pose.apply(q.point[s]),
                                normal=n / np.linalg.norm(n),
                                impulse=float(k * pen[s] * dt),
                                impulse_vec=-k * pen[s] * dt * n,
                                kind=CONTACT_OBJECT))
    below = centers[:, 2] - desc.sphere_radius - table_height
    for s in np.flatnonzero(below < 0.0):
        contacts.append(Contact(link=int(desc.sphere_link[s]),
                                point=centers[s].copy(),
                                normal=np.array([0.0, 0.0, 1.0]),
                                impulse=float(-below[s] * k * dt),
                                impulse_vec=np.zeros(3),
                                kind=CONTACT_TABLE))
    if len(desc.self_pairs):
        a, b = desc.self_pairs[:, 0], desc.self_pairs[:, 1]
        gap = (np.linalg.norm(centers[a] - centers[b], axis=1)
               - desc.sphere_radius[a] - desc.sphere_radius[b])
        for j in np.flatnonzero(gap < 0.0):
            d = centers[b[j]] - centers[a[j]]
            nd = np.linalg.norm(d)
            n = d / nd if nd > 1e-12 else np.array([0.0, 0.0, 1.0])
            contacts.append(Contact(link=int(desc.sphere_link[a[j]]),
                                    point=(centers[a[j]] + centers[b[j]]) / 2,
                                    normal=n, impulse=float(-gap[j] * k * dt),
                                    impulse_vec=np.zeros(3), kind=CONTACT_SELF))
    return contacts


# -- standalone success check ---------------------------------------------------


def success_check(heights, rest_height: float, dt: float,
                  min_lift: float = 0.05, hold: float = 3.0) -> bool:
    """True iff z stayed >= rest + min_lift continuously for >= hold seconds.

    Duration is elapsed time between the first and last frame of a
    continuous lifted run, matching the in-env latch.
    """
    start = None
    for i, z in enumerate(heights):
        if z >= rest_height + min_lift:
            if start is None:
                start = i
            elif (i - start) * dt >= hold:
                return True
        else:
            start = None
    return False
