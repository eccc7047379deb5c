"""Grasp-taxonomy template library and grasp commands.

A template bundles one taxonomy's reference joint pose, per-link
engagement mask, and reference contact points/normals (link-local).
The library ships as a JSON data file; everything here is immutable
after load and safe to share.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, TemplateError
from .hand import HandDescription
from .transforms import assert_unit_quat, direction_frame, frame_from_palm_axis

LIBRARY_SIZE = 30
NORMAL_TOL = 1e-9

# Default orientation set used when sampling commands: the eight yaw
# directions of the evaluation protocol at a fixed approach elevation.
DEFAULT_DIRECTIONS = 8
DEFAULT_ELEVATION_RAD = np.deg2rad(30.0)


@dataclass(frozen=True)
class GraspTemplate:
    name: str
    family: str
    q_ref: np.ndarray            # (D,)
    mask: np.ndarray             # (L,) bool
    contact_points: np.ndarray   # (L, 3) link-local
    contact_normals: np.ndarray  # (L, 3) link-local, expected object-outward
    index: int = 0               # position within the library

    def active_links(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def num_active(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class GraspCommand:
    taxonomy: str
    wrist_orientation: np.ndarray  # unit quaternion, w-first

    def __post_init__(self):
        assert_unit_quat(self.wrist_orientation)


class TemplateLibrary:
    def __init__(self, hand_id: str, dof: int, num_links: int,
                 templates: list[GraspTemplate]):
        self.hand_id = hand_id
        self.dof = dof
        self.num_links = num_links
        self.templates = templates
        self.by_name = {t.name: t for t in templates}
        if len(self.by_name) != len(templates):
            raise TemplateError("duplicate taxonomy names in library")

    def __len__(self):
        return len(self.templates)

    def __iter__(self):
        return iter(self.templates)

    def __getitem__(self, key) -> GraspTemplate:
        if isinstance(key, str):
            if key not in self.by_name:
                raise KeyError(f"unknown taxonomy {key!r}")
            return self.by_name[key]
        return self.templates[key]

    def names(self) -> list[str]:
        return [t.name for t in self.templates]

    def dump(self, path):
        doc = {
            "hand_id": self.hand_id,
            "dof": self.dof,
            "links": self.num_links,
            "templates": [{
                "name": t.name,
                "family": t.family,
                "q_ref": t.q_ref.tolist(),
                "mask": [bool(v) for v in t.mask],
                "contact_points": t.contact_points.tolist(),
                "contact_normals": t.contact_normals.tolist(),
            } for t in self.templates],
        }
        Path(path).write_text(json.dumps(doc, indent=1))


def _validate_template(t: GraspTemplate, dof: int, num_links: int,
                       hand: HandDescription | None):
    if t.q_ref.shape != (dof,):
        raise TemplateError(f"{t.name}: q_ref has shape {t.q_ref.shape}, expected ({dof},)")
    if t.mask.shape != (num_links,):
        raise TemplateError(f"{t.name}: mask has shape {t.mask.shape}, expected ({num_links},)")
    if t.contact_points.shape != (num_links, 3) or t.contact_normals.shape != (num_links, 3):
        raise TemplateError(f"{t.name}: contact arrays must be ({num_links}, 3)")
    if not t.mask.any():
        raise TemplateError(f"{t.name}: engagement mask has no active link")
    norms = np.linalg.norm(t.contact_normals[t.mask], axis=1)
    if np.any(np.abs(norms - 1.0) >= NORMAL_TOL):
        raise TemplateError(f"{t.name}: active contact normal is not unit length")
    if hand is not None:
        lo, hi = hand.joint_limits[:, 0], hand.joint_limits[:, 1]
        if np.any(t.q_ref < lo - 1e-9) or np.any(t.q_ref > hi + 1e-9):
            raise TemplateError(f"{t.name}: q_ref violates joint limits")
        for l in t.active_links():
            lk = hand.links[l]
            if not lk.is_fingertip:
                continue
            c, r = lk.sphere_centers[-1], lk.sphere_radii[-1]
            expected = c + r * np.array([0.0, 0.0, 1.0])
            if np.linalg.norm(t.contact_points[l] - expected) > 1e-6:
                raise TemplateError(
                    f"{t.name}: fingertip contact point for link {lk.name!r} "
                    f"is not at the fingerpad center")


def load_library(path, hand: HandDescription | None = None) -> TemplateLibrary:
    """Load and validate the 30-template library from a JSON file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"template file not found: {path}")
    raw = json.loads(path.read_text())
    dof, num_links = int(raw["dof"]), int(raw["links"])
    if hand is not None and (dof != hand.dof or num_links != hand.num_links):
        raise DimensionError(
            f"template file is for D={dof}, L={num_links}; hand has "
            f"D={hand.dof}, L={hand.num_links}")
    templates = []
    for i, doc in enumerate(raw["templates"]):
        t = GraspTemplate(
            name=doc["name"],
            family=doc.get("family", "power"),
            q_ref=np.asarray(doc["q_ref"], dtype=float),
            mask=np.asarray(doc["mask"], dtype=bool),
            contact_points=np.asarray(doc["contact_points"], dtype=float),
            contact_normals=np.asarray(doc["contact_normals"], dtype=float),
            index=i,
        )
        _validate_template(t, dof, num_links, hand)
        templates.append(t)
    if len(templates) != LIBRARY_SIZE:
        raise TemplateError(
            f"library must contain exactly {LIBRARY_SIZE} templates, "
            f"found {len(templates)}")
    return TemplateLibrary(raw["hand_id"], dof, num_links, templates)


def default_library_path() -> Path:
    return Path(__file__).parent / "data" / "templates" / "feix30.json"


def default_hand_path() -> Path:
    return Path(__file__).parent / "data" / "hands" / "default20.json"


def command_feature(template: GraspTemplate, q, wrist_orientation) -> np.ndarray:
    """Policy conditioning feature: [q_ref - q, mask, target orientation]."""
    q = np.asarray(q, dtype=float)
    if q.shape != template.q_ref.shape:
        raise DimensionError(
            f"joint vector has shape {q.shape}, expected {template.q_ref.shape}")
    quat = assert_unit_quat(wrist_orientation)
    return np.concatenate([template.q_ref - q,
                           template.mask.astype(float),
                           quat])


def orientation_for_direction(direction, elevation_rad: float = DEFAULT_ELEVATION_RAD) -> np.ndarray:
    """Wrist orientation aiming the palm at a target along `direction`.

    `direction` is the horizontal approach direction (wrist toward object);
    the palm normal tilts down by the elevation angle.
    """
    approach, fingers = direction_frame(direction, elevation_rad)
    return frame_from_palm_axis(approach, fingers)


def yaw_direction(index: int, count: int = DEFAULT_DIRECTIONS) -> np.ndarray:
    theta = 2.0 * np.pi * index / count
    return np.array([np.cos(theta), np.sin(theta), 0.0])


def sample_command(rng: np.random.Generator, library: TemplateLibrary,
                   directions: int = DEFAULT_DIRECTIONS,
                   elevation_rad: float = DEFAULT_ELEVATION_RAD) -> GraspCommand:
    """Uniformly sample a taxonomy and a target wrist orientation."""
    if len(library) == 0:
        raise ValueError("cannot sample from an empty library")
    t = library[int(rng.integers(len(library)))]
    d = int(rng.integers(directions))
    quat = orientation_for_direction(yaw_direction(d, directions), elevation_rad)
    return GraspCommand(taxonomy=t.name, wrist_orientation=quat)
