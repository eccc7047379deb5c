#!/usr/bin/env python3
"""Regenerates the shipped data files (hand model, grasp templates, BPS
basis, planner rule table) deterministically.

Authoring notes
---------------
* Hand: 5 fingers x 4 joints (abduction + 3 flexion joints), 21 links
  (palm + 20 phalanges). Palm frame: +x along the fingers, +z out of the
  palm surface. Flexion axes are (0,-1,0) so positive angles curl the
  fingers over the palm (+x toward +z). The thumb is mounted on the -y
  edge, rolled so its pad faces up and across the palm.
* Templates: one per grasp taxonomy, written as a recipe table below
  (finger posture presets + engaged-link sets). Contact points sit at the
  fingerpad center of each link's collision sphere (center + r * local z);
  contact normals are the expected object-surface outward normal at that
  contact, i.e. -local z (into the pad).
* BPS basis: 64 points sampled uniformly in a 0.25 m ball around the
  wrist origin with a fixed seed.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from taxgrasp.hand import HandDescription  # noqa: E402
from taxgrasp.transforms import quat_from_axis_angle, quat_mul, quat_normalize  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "taxgrasp" / "data"

FLEX_AXIS = [0.0, -1.0, 0.0]
ABD_AXIS = [0.0, 0.0, 1.0]

# name -> (base y, knuckle, proximal, middle, distal lengths)
FINGERS = {
    "index": (0.027, 0.012, 0.032, 0.022, 0.020),
    "middle": (0.009, 0.012, 0.035, 0.024, 0.021),
    "ring": (-0.009, 0.012, 0.032, 0.022, 0.020),
    "little": (-0.027, 0.012, 0.026, 0.018, 0.018),
}
FINGER_BASE_X = 0.085
FINGER_RADII = (0.009, 0.009, 0.008, 0.007)

THUMB_BASE = [0.060, -0.045, -0.005]
THUMB_SEGS = (0.015, 0.050, 0.034, 0.028)
THUMB_RADII = (0.011, 0.011, 0.009, 0.008)
THUMB_YAW = 2.0      # about palm z: thumb lies across the palm
THUMB_ROLL = 1.0     # about thumb x: pad rolls to face the curled fingers


def _rot(axis, angle):
    return quat_from_axis_angle(axis, angle)


def build_hand() -> dict:
    joints = []
    links = [{
        "name": "palm",
        "offset": {"position": [0.0, 0.0, 0.0], "orientation": [1.0, 0.0, 0.0, 0.0]},
        "spheres": [{"center": [x, y, -0.012], "radius": 0.022}
                    for x in (0.030, 0.060) for y in (-0.016, 0.016)],
        "is_palm": True,
    }]

    def add_chain(prefix, base_pos, base_quat, seg_lengths, radii, abd_limits,
                  flex_limits):
        base_link = 0
        names = ("knuckle", "proximal", "middle", "distal")
        axes = [ABD_AXIS] + [FLEX_AXIS] * 3
        limits = [abd_limits] + list(flex_limits)
        offset_pos = base_pos
        offset_quat = base_quat
        for k in range(4):
            joint_idx = len(joints)
            joints.append({"axis": axes[k], "limits": list(limits[k]),
                           "parent_link": base_link})
            length, radius = seg_lengths[k], radii[k]
            if k == 1:  # proximal segment gets two spheres
                spheres = [{"center": [length * f, 0.0, 0.0], "radius": radius}
                           for f in (0.33, 0.75)]
            else:
                spheres = [{"center": [length * 0.55, 0.0, 0.0], "radius": radius}]
            links.append({
                "name": f"{prefix}_{names[k]}",
                "parent_joint": joint_idx,
                "offset": {"position": list(offset_pos),
                           "orientation": [float(v) for v in offset_quat]},
                "spheres": spheres,
                "is_fingertip": k == 3,
            })
            base_link = len(links) - 1
            offset_pos = [length, 0.0, 0.0]
            offset_quat = [1.0, 0.0, 0.0, 0.0]

    for name, (y, *segs) in FINGERS.items():
        add_chain(name, [FINGER_BASE_X, y, 0.0], [1.0, 0.0, 0.0, 0.0],
                  segs, FINGER_RADII,
                  abd_limits=(-0.35, 0.35),
                  flex_limits=[(-0.26, 1.75), (-0.17, 1.92), (-0.17, 1.75)])

    thumb_quat = quat_normalize(quat_mul(_rot([0, 0, 1], THUMB_YAW),
                                         _rot([1, 0, 0], THUMB_ROLL)))
    add_chain("thumb", THUMB_BASE, thumb_quat, THUMB_SEGS, THUMB_RADII,
              abd_limits=(-0.6, 1.1),
              flex_limits=[(-0.26, 1.25), (-0.17, 1.35), (-0.17, 1.60)])

    return {
        "name": "default20",
        "joints": joints,
        "links": links,
        "pd_gains": {"kp": [400.0] * 20, "kd": [40.0] * 20},
        # The thumb metacarpal rides inside the palm silhouette, as in a
        # real hand; treat that overlap as permanent adjacency, not contact.
        "no_collide": [["palm", "thumb_proximal"], ["palm", "thumb_middle"]],
    }


# -- grasp templates --------------------------------------------------------

# Posture presets: (abd, mcp, pip, dip) for fingers, (abd, cmc, mp, ip) thumb.
POSE = {
    "ext":    (0.00, 0.02, 0.02, 0.02),
    "open":   (0.00, 0.25, 0.15, 0.10),
    "half":   (0.00, 0.75, 0.60, 0.40),
    "wrap":   (0.00, 1.00, 0.85, 0.55),
    "power":  (0.00, 1.20, 1.05, 0.70),
    "pinch":  (0.00, 1.05, 0.65, 0.40),
    "tuck":   (0.00, 1.60, 1.70, 1.30),
}
TPOSE = {
    "t_ext":     (0.05, 0.10, 0.05, 0.05),
    "t_open":    (0.20, 0.30, 0.20, 0.15),
    "t_side":    (0.00, 0.30, 0.30, 0.25),
    "t_oppose":  (0.30, 0.55, 0.45, 0.35),
    "t_power":   (0.50, 0.70, 0.55, 0.45),
}

FINGER_ORDER = ("index", "middle", "ring", "little", "thumb")

# Engaged-link shorthand: which links of a finger belong to the mask.
TIP = ("distal",)
TIP2 = ("middle", "distal")
ALL = ("knuckle", "proximal", "middle", "distal")
GRIP = ("proximal", "middle", "distal")

# name: (family, palm_in_mask, per-finger (pose, engaged-links or None), spread)
RECIPES = {
    "LargeDiameter":   ("power", True,  dict(index=("open", GRIP), middle=("open", GRIP), ring=("open", GRIP), little=("open", GRIP), thumb=("t_power", GRIP)), 0.10),
    "MediumDiameter":  ("power", True,  dict(index=("wrap", GRIP), middle=("wrap", GRIP), ring=("wrap", GRIP), little=("wrap", GRIP), thumb=("t_power", GRIP)), 0.05),
    "SmallDiameter":   ("power", True,  dict(index=("power", GRIP), middle=("power", GRIP), ring=("power", GRIP), little=("power", GRIP), thumb=("t_oppose", GRIP)), 0.02),
    "AdductedThumb":   ("power", True,  dict(index=("wrap", GRIP), middle=("wrap", GRIP), ring=("wrap", GRIP), little=("wrap", GRIP), thumb=("t_side", TIP2)), 0.00),
    "LightTool":       ("power", True,  dict(index=("power", GRIP), middle=("power", GRIP), ring=("power", GRIP), little=("power", GRIP), thumb=("t_side", TIP)), 0.02),
    "Prismatic4Finger": ("precision", False, dict(index=("pinch", TIP), middle=("pinch", TIP), ring=("pinch", TIP), little=("pinch", TIP), thumb=("t_oppose", TIP)), 0.06),
    "Prismatic3Finger": ("precision", False, dict(index=("pinch", TIP), middle=("pinch", TIP), ring=("pinch", TIP), little=("tuck", None), thumb=("t_oppose", TIP)), 0.05),
    "Prismatic2Finger": ("precision", False, dict(index=("pinch", TIP), middle=("pinch", TIP), ring=("tuck", None), little=("tuck", None), thumb=("t_oppose", TIP)), 0.04),
    "PalmarPinch":     ("precision", False, dict(index=("pinch", TIP), middle=("tuck", None), ring=("tuck", None), little=("tuck", None), thumb=("t_oppose", TIP)), 0.00),
    "PowerDisk":       ("power", True,  dict(index=("half", GRIP), middle=("half", GRIP), ring=("half", GRIP), little=("half", GRIP), thumb=("t_power", GRIP)), 0.28),
    "PowerSphere":     ("power", True,  dict(index=("wrap", GRIP), middle=("wrap", GRIP), ring=("wrap", GRIP), little=("wrap", GRIP), thumb=("t_power", GRIP)), 0.22),
    "PrecisionDisk":   ("precision", False, dict(index=("open", TIP), middle=("open", TIP), ring=("open", TIP), little=("open", TIP), thumb=("t_oppose", TIP)), 0.30),
    "PrecisionSphere": ("precision", False, dict(index=("half", TIP), middle=("half", TIP), ring=("half", TIP), little=("half", TIP), thumb=("t_oppose", TIP)), 0.25),
    "Tripod":          ("precision", False, dict(index=("pinch", TIP), middle=("pinch", TIP), ring=("tuck", None), little=("tuck", None), thumb=("t_oppose", TIP)), 0.10),
    "Lateral":         ("intermediate", False, dict(index=("half", TIP2), middle=("tuck", None), ring=("tuck", None), little=("tuck", None), thumb=("t_side", TIP)), 0.00),
    "IndexFingerExtension": ("power", True, dict(index=("ext", None), middle=("power", GRIP), ring=("power", GRIP), little=("power", GRIP), thumb=("t_oppose", GRIP)), 0.00),
    "ExtensionType":   ("intermediate", False, dict(index=("open", TIP2), middle=("open", TIP2), ring=("open", TIP2), little=("open", TIP2), thumb=("t_oppose", TIP)), 0.08),
    "TripodVariation": ("precision", False, dict(index=("pinch", TIP), middle=("pinch", TIP2), ring=("tuck", None), little=("tuck", None), thumb=("t_oppose", TIP)), 0.08),
    "ParallelExtension": ("intermediate", False, dict(index=("open", TIP2), middle=("open", TIP2), ring=("open", TIP2), little=("open", TIP2), thumb=("t_oppose", TIP2)), 0.02),
    "AdductionGrip":   ("intermediate", False, dict(index=("half", TIP2), middle=("half", TIP2), ring=("tuck", None), little=("tuck", None), thumb=("t_ext", None)), 0.00),
    "TipPinch":        ("precision", False, dict(index=("pinch", TIP), middle=("tuck", None), ring=("tuck", None), little=("tuck", None), thumb=("t_oppose", TIP)), 0.00),
    "LateralTripod":   ("intermediate", False, dict(index=("pinch", TIP), middle=("half", TIP2), ring=("tuck", None), little=("tuck", None), thumb=("t_side", TIP)), 0.05),
    "Sphere4Finger":   ("power", True,  dict(index=("wrap", GRIP), middle=("wrap", GRIP), ring=("wrap", GRIP), little=("tuck", None), thumb=("t_power", GRIP)), 0.20),
    "Quadpod":         ("precision", False, dict(index=("pinch", TIP), middle=("pinch", TIP), ring=("pinch", TIP), little=("tuck", None), thumb=("t_oppose", TIP)), 0.12),
    "Sphere3Finger":   ("power", True,  dict(index=("wrap", GRIP), middle=("wrap", GRIP), ring=("tuck", None), little=("tuck", None), thumb=("t_power", GRIP)), 0.18),
    "Stick":           ("power", True,  dict(index=("power", GRIP), middle=("power", GRIP), ring=("power", GRIP), little=("power", GRIP), thumb=("t_side", TIP2)), 0.00),
    "Palmar":          ("power", True,  dict(index=("open", TIP2), middle=("open", TIP2), ring=("open", TIP2), little=("open", TIP2), thumb=("t_side", TIP)), 0.04),
    "Ring":            ("power", False, dict(index=("wrap", ALL), middle=("tuck", None), ring=("tuck", None), little=("tuck", None), thumb=("t_oppose", GRIP)), 0.00),
    "Ventral":         ("power", True,  dict(index=("half", GRIP), middle=("half", GRIP), ring=("half", GRIP), little=("half", GRIP), thumb=("t_oppose", GRIP)), 0.06),
    "InferiorPincer":  ("precision", False, dict(index=("open", TIP), middle=("tuck", None), ring=("tuck", None), little=("tuck", None), thumb=("t_open", TIP)), 0.00),
}

# Abduction spread signs per finger (index spreads +y, little -y).
SPREAD_SIGN = {"index": 1.0, "middle": 0.35, "ring": -0.35, "little": -1.0, "thumb": 0.0}


def build_templates(desc: HandDescription) -> dict:
    link_names = [lk.name for lk in desc.links]
    name_to_link = {n: i for i, n in enumerate(link_names)}

    templates = []
    for tax, (family, palm_active, fingers, spread) in RECIPES.items():
        q = np.zeros(desc.dof)
        mask = np.zeros(desc.num_links, dtype=bool)
        mask[0] = palm_active
        for fi, fname in enumerate(FINGER_ORDER):
            pose_name, engaged = fingers[fname]
            pose = TPOSE[pose_name] if fname == "thumb" else POSE[pose_name]
            base_joint = fi * 4
            q[base_joint:base_joint + 4] = pose
            if fname != "thumb":
                q[base_joint] += spread * SPREAD_SIGN[fname]
            if engaged:
                for seg in engaged:
                    mask[name_to_link[f"{fname}_{seg}"]] = True
        q = desc.clamp(q)

        contact_points = np.zeros((desc.num_links, 3))
        contact_normals = np.zeros((desc.num_links, 3))
        for l, lk in enumerate(desc.links):
            c = lk.sphere_centers[-1]
            r = lk.sphere_radii[-1]
            pad_dir = np.array([0.0, 0.0, -1.0]) if lk.is_palm else np.array([0.0, 0.0, 1.0])
            # Palm pad faces +z but its spheres sit below the surface plane;
            # use the topmost sphere surface point for the palm.
            if lk.is_palm:
                contact_points[l] = c + np.array([0.0, 0.0, r])
                contact_normals[l] = np.array([0.0, 0.0, -1.0])
            else:
                contact_points[l] = c + r * pad_dir
                contact_normals[l] = -pad_dir
        templates.append({
            "name": tax,
            "family": family,
            "q_ref": [round(float(v), 6) for v in q],
            "mask": [bool(v) for v in mask],
            "contact_points": [[round(float(v), 7) for v in p] for p in contact_points],
            "contact_normals": [[round(float(v), 7) for v in n] for n in contact_normals],
        })

    return {
        "hand_id": desc.name,
        "dof": desc.dof,
        "links": desc.num_links,
        "templates": templates,
    }


def build_bps(m=64, radius=0.25, seed=20240817) -> dict:
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < m:
        p = rng.uniform(-radius, radius, size=3)
        if np.linalg.norm(p) <= radius:
            pts.append(p)
    return {"radius": radius, "seed": seed,
            "points": [[round(float(v), 8) for v in p] for p in pts]}


def build_planner_rules() -> dict:
    return {
        "rules": [
            {"if": {"min_extent_lt": 0.015}, "select": "Prismatic4Finger"},
            {"if": {"circularity_gt": 0.8, "mid_extent_between": [0.03, 0.08]},
             "select": "MediumDiameter"},
            {"if": {"isotropy_lt": 1.4, "min_extent_gt": 0.05}, "select": "PowerSphere"},
            {"if": {"max_extent_gt": 0.12, "min_extent_lt": 0.04}, "select": "SmallDiameter"},
            {"if": {"min_extent_lt": 0.03}, "select": "PalmarPinch"},
        ],
        "fallback": "MediumDiameter",
        "task_overrides": {
            "squeeze": {"near_isotropic": "PowerSphere", "default": "MediumDiameter"},
            "lift": None,
            "default": None,
        },
    }


def main():
    (DATA / "hands").mkdir(parents=True, exist_ok=True)
    (DATA / "templates").mkdir(parents=True, exist_ok=True)

    hand_doc = build_hand()
    hand_path = DATA / "hands" / "default20.json"
    hand_path.write_text(json.dumps(hand_doc, indent=1))
    desc = HandDescription.load(hand_path)
    print(f"hand: D={desc.dof} L={desc.num_links} spheres={len(desc.sphere_link)}"
          f" self_pairs={len(desc.self_pairs)}")

    tmpl_doc = build_templates(desc)
    (DATA / "templates" / "feix30.json").write_text(json.dumps(tmpl_doc, indent=1))
    print(f"templates: {len(tmpl_doc['templates'])}")

    (DATA / "bps64.json").write_text(json.dumps(build_bps(), indent=1))
    (DATA / "planner_rules.json").write_text(json.dumps(build_planner_rules(), indent=1))
    print("wrote bps64.json, planner_rules.json")


if __name__ == "__main__":
    main()
