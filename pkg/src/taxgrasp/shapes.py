"""Object geometry sources: analytic primitives, OBJ meshes, and PLY clouds.

Every shape can produce dense surface samples with outward normals and a
signed distance query; the analytic primitives answer exactly, mesh and
cloud shapes answer via their surface samples.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class SurfaceQuery:
    """Closest-surface answer for a batch of query points."""

    distance: np.ndarray  # signed: negative inside
    normal: np.ndarray    # outward at the closest surface point
    point: np.ndarray     # closest surface point


class Shape:
    """Interface: local-frame geometry of a rigid object."""

    def surface_samples(self, count: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def query(self, points: np.ndarray) -> SurfaceQuery:
        raise NotImplementedError

    def bounding_radius(self) -> float:
        raise NotImplementedError


class Sphere(Shape):
    def __init__(self, radius: float):
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        self.radius = float(radius)

    def surface_samples(self, count, seed=0):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return self.radius * v, v

    def query(self, points):
        points = np.atleast_2d(points)
        d = np.linalg.norm(points, axis=1)
        safe = np.maximum(d, 1e-12)
        n = points / safe[:, None]
        n[d < 1e-12] = np.array([0.0, 0.0, 1.0])
        return SurfaceQuery(distance=d - self.radius, normal=n,
                            point=n * self.radius)

    def bounding_radius(self):
        return self.radius


class Box(Shape):
    def __init__(self, size):
        self.half = np.asarray(size, dtype=float).reshape(3) / 2.0
        if np.any(self.half <= 0):
            raise ValueError("box extents must be positive")

    def surface_samples(self, count, seed=0):
        rng = np.random.default_rng(seed)
        h = self.half
        areas = 4 * np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]])
        areas = np.repeat(areas, 2)
        face = rng.choice(6, size=count, p=areas / areas.sum())
        uv = rng.uniform(-1.0, 1.0, size=(count, 2))
        pts = np.empty((count, 3))
        nrm = np.zeros((count, 3))
        for f in range(6):
            axis, sign = f // 2, 1.0 if f % 2 == 0 else -1.0
            m = face == f
            others = [a for a in range(3) if a != axis]
            pts[m, axis] = sign * h[axis]
            pts[m, others[0]] = uv[m, 0] * h[others[0]]
            pts[m, others[1]] = uv[m, 1] * h[others[1]]
            nrm[m, axis] = sign
        return pts, nrm

    def query(self, points):
        points = np.atleast_2d(points)
        n_pts = len(points)
        q = np.abs(points) - self.half
        outside = np.maximum(q, 0.0)
        dist_out = np.linalg.norm(outside, axis=1)
        inside_gap = np.max(q, axis=1)  # negative depth when inside
        distance = np.where(inside_gap > 0, dist_out, inside_gap)

        surface = np.clip(points, -self.half, self.half)
        normal = np.zeros((n_pts, 3))
        out_mask = inside_gap > 0
        if out_mask.any():
            d = points[out_mask] - surface[out_mask]
            nd = np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-12)
            normal[out_mask] = d / nd
        in_mask = ~out_mask
        if in_mask.any():
            # Push out through the nearest face.
            face_axis = np.argmax(q[in_mask], axis=1)
            sign = np.sign(points[in_mask, face_axis])
            sign[sign == 0] = 1.0
            normal[in_mask, face_axis] = sign
            surf_in = points[in_mask].copy()
            surf_in[np.arange(in_mask.sum()), face_axis] = sign * self.half[face_axis]
            surface[in_mask] = surf_in
        return SurfaceQuery(distance=distance, normal=normal, point=surface)

    def bounding_radius(self):
        return float(np.linalg.norm(self.half))


class SampledSurface(Shape):
    """Shape backed by dense surface samples with outward normals."""

    def __init__(self, points, normals):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        self.normals = np.asarray(normals, dtype=float).reshape(-1, 3)
        if len(self.points) != len(self.normals):
            raise ValueError("points/normals length mismatch")
        n = np.linalg.norm(self.normals, axis=1, keepdims=True)
        self.normals = self.normals / np.maximum(n, 1e-12)

    def surface_samples(self, count, seed=0):
        if count >= len(self.points):
            return self.points.copy(), self.normals.copy()
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self.points), size=count, replace=False)
        return self.points[idx], self.normals[idx]

    def query(self, points):
        points = np.atleast_2d(points)
        # Nearest sample; signedness from that sample's outward normal.
        d2 = ((points[:, None, :] - self.points[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d2, axis=1)
        nearest = self.points[idx]
        normal = self.normals[idx]
        offset = points - nearest
        signed = np.einsum("ij,ij->i", offset, normal)
        return SurfaceQuery(distance=signed, normal=normal, point=nearest)

    def bounding_radius(self):
        return float(np.linalg.norm(self.points, axis=1).max())


def load_obj(path) -> SampledSurface:
    """Sample an OBJ mesh's surface uniformly by triangle area."""
    verts, faces = [], []
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(v) for v in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise ValueError(f"OBJ file {path} has no usable geometry")
    v = np.asarray(verts)
    f = np.asarray(faces)
    return sample_mesh(v, f, count=4096, seed=0)


def sample_mesh(vertices, faces, count: int, seed: int = 0) -> SampledSurface:
    a, b, c = (vertices[faces[:, k]] for k in range(3))
    cross = np.cross(b - a, c - a)
    area = 0.5 * np.linalg.norm(cross, axis=1)
    if area.sum() <= 0:
        raise ValueError("mesh has zero surface area")
    normal = cross / np.maximum(np.linalg.norm(cross, axis=1, keepdims=True), 1e-12)
    rng = np.random.default_rng(seed)
    tri = rng.choice(len(faces), size=count, p=area / area.sum())
    u, v = rng.uniform(size=(2, count))
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    pts = a[tri] + u[:, None] * (b[tri] - a[tri]) + v[:, None] * (c[tri] - a[tri])
    return SampledSurface(pts, normal[tri])


def load_ply(path) -> SampledSurface:
    """Read an ASCII PLY point cloud with x y z [nx ny nz] properties."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path} is not a PLY file")
    n_vert = 0
    props = []
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        if parts[:2] == ["element", "vertex"]:
            n_vert = int(parts[2])
        elif parts and parts[0] == "property" and n_vert and len(props) < 16:
            props.append(parts[2])
        elif parts == ["end_header"]:
            i += 1
            break
        i += 1
    rows = np.array([[float(v) for v in lines[i + k].split()] for k in range(n_vert)])
    cols = {name: j for j, name in enumerate(props)}
    pts = rows[:, [cols["x"], cols["y"], cols["z"]]]
    if {"nx", "ny", "nz"} <= cols.keys():
        normals = rows[:, [cols["nx"], cols["ny"], cols["nz"]]]
    else:
        # Fall back to radial normals about the centroid.
        offset = pts - pts.mean(axis=0)
        normals = offset / np.maximum(np.linalg.norm(offset, axis=1, keepdims=True), 1e-12)
    return SampledSurface(pts, normals)


def make_shape(spec: dict) -> Shape:
    """Build a shape from a config dict: {'type': 'sphere'|'box'|'obj'|'ply', ...}."""
    kind = spec["type"]
    if kind == "sphere":
        return Sphere(spec["radius"])
    if kind == "box":
        return Box(spec["size"])
    if kind == "obj":
        return load_obj(spec["path"])
    if kind == "ply":
        return load_ply(spec["path"])
    raise ValueError(f"unknown shape type {kind!r}")
