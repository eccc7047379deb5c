"""Point-cloud handling and the geometric features fed to the policy:
wrist-frame transforms, object center, wrist displacement, per-link
nearest-surface distances, table clearance, BPS encoding, and simulated
partial views.

Nearest-neighbor queries run either as an exhaustive vectorized scan or
through a uniform voxel grid; both produce the same arithmetic, so the
accelerated path is exact, not approximate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FrameError
from .hand import HandDescription
from .transforms import Pose

WORLD = "world"
WRIST = "wrist"


@dataclass
class PointCloud:
    points: np.ndarray                 # (n, 3)
    normals: np.ndarray | None = None  # (n, 3) unit, optional
    frame: str = WORLD

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(self.points) < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.isfinite(self.points).all():
            raise ValueError("point cloud contains non-finite coordinates")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(self.normals) != len(self.points):
                raise ValueError("normals length mismatch")
            norms = np.linalg.norm(self.normals, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-6):
                raise ValueError("normals must be unit length")
        if self.frame not in (WORLD, WRIST):
            raise FrameError(f"unknown frame tag {self.frame!r}")

    def __len__(self):
        return len(self.points)


@dataclass
class BpsConfig:
    basis_points: np.ndarray  # (m, 3) wrist frame

    def __post_init__(self):
        self.basis_points = np.asarray(self.basis_points, dtype=float).reshape(-1, 3)
        m = len(self.basis_points)
        if m < 8:
            raise ValueError(f"need at least 8 basis points, got {m}")
        d2 = ((self.basis_points[:, None] - self.basis_points[None]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        if d2.min() <= 0.0:
            raise ValueError("basis points must be distinct")

    @property
    def size(self) -> int:
        return len(self.basis_points)

    @staticmethod
    def load(path) -> "BpsConfig":
        raw = json.loads(Path(path).read_text())
        return BpsConfig(np.asarray(raw["points"], dtype=float))


def default_bps_path() -> Path:
    return Path(__file__).parent / "data" / "bps64.json"


# -- frame handling ----------------------------------------------------------


def to_wrist_frame(cloud: PointCloud, wrist: Pose) -> PointCloud:
    if cloud.frame != WORLD:
        raise FrameError("to_wrist_frame expects a world-frame cloud")
    inv = wrist.inverse()
    normals = None if cloud.normals is None else cloud.normals @ inv.rotation().T
    return PointCloud(inv.apply(cloud.points), normals, frame=WRIST)


def to_world_frame(cloud: PointCloud, wrist: Pose) -> PointCloud:
    if cloud.frame != WRIST:
        raise FrameError("to_world_frame expects a wrist-frame cloud")
    normals = None if cloud.normals is None else cloud.normals @ wrist.rotation().T
    return PointCloud(wrist.apply(cloud.points), normals, frame=WORLD)


def object_center(cloud: PointCloud) -> np.ndarray:
    return cloud.points.mean(axis=0)


def wrist_object_displacement(wrist: Pose, cloud: PointCloud) -> np.ndarray:
    """Displacement from the wrist to the cloud mean, world frame."""
    if cloud.frame != WORLD:
        raise FrameError("wrist_object_displacement expects a world-frame cloud")
    return object_center(cloud) - wrist.position


# -- exact nearest neighbors -------------------------------------------------


class VoxelGrid:
    """Uniform voxel hash over a point set for exact nearest-point queries.

    Cells are visited in expanding shells; the search stops once the
    closest possible distance of the next shell exceeds the best hit, so
    the answer (including the tie-break on the lowest point index) always
    matches the exhaustive scan.
    """

    def __init__(self, points, cell: float | None = None):
        self.points = np.asarray(points, dtype=float).reshape(-1, 3)
        n = len(self.points)
        if cell is None:
            span = self.points.max(axis=0) - self.points.min(axis=0)
            vol = float(np.prod(np.maximum(span, 1e-6)))
            cell = max((vol / max(n, 1)) ** (1.0 / 3.0), 1e-6)
        self.cell = float(cell)
        self.origin = self.points.min(axis=0)
        keys = np.floor((self.points - self.origin) / self.cell).astype(np.int64)
        self.key_max = keys.max(axis=0)
        self.buckets: dict[tuple[int, int, int], np.ndarray] = {}
        order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
        sorted_keys = keys[order]
        start = 0
        for i in range(1, n + 1):
            if i == n or (sorted_keys[i] != sorted_keys[start]).any():
                self.buckets[tuple(sorted_keys[start])] = np.sort(order[start:i])
                start = i

    @staticmethod
    def _shell(center, radius: int):
        cx, cy, cz = center
        if radius == 0:
            yield (cx, cy, cz)
            return
        r = radius
        for dx in range(-r, r + 1):
            for dy in range(-r, r + 1):
                for dz in range(-r, r + 1):
                    if max(abs(dx), abs(dy), abs(dz)) == r:
                        yield (cx + dx, cy + dy, cz + dz)

    def nearest(self, query) -> tuple[int, float]:
        """Index of the nearest point and its squared distance.

        Ties resolve to the lowest point index, like np.argmin over the
        full distance array.
        """
        q = np.asarray(query, dtype=float)
        center = np.floor((q - self.origin) / self.cell).astype(np.int64)
        # Once shells 0..R are scanned, unscanned points are at Chebyshev
        # cell distance >= R+1, hence at least R * cell away from q.
        max_radius = int(max(np.maximum(np.abs(center), np.abs(center - self.key_max)))) + 1
        best_idx, best_d2 = -1, np.inf
        for radius in range(max_radius + 1):
            candidates = [self.buckets[key] for key in self._shell(tuple(center), radius)
                          if key in self.buckets]
            if candidates:
                idx = np.concatenate(candidates)
                d2 = ((self.points[idx] - q) ** 2).sum(axis=1)
                order = np.lexsort((idx, d2))
                k = order[0]
                if d2[k] < best_d2 or (d2[k] == best_d2 and idx[k] < best_idx):
                    best_idx, best_d2 = int(idx[k]), float(d2[k])
            bound = radius * self.cell
            if best_idx >= 0 and best_d2 < bound * bound:
                break
        return best_idx, best_d2


def nearest_points(queries, cloud_points, grid: VoxelGrid | None = None):
    """Nearest cloud point for each query: (indices, vectors to nearest)."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    pts = np.asarray(cloud_points, dtype=float)
    if grid is not None:
        idx = np.array([grid.nearest(q)[0] for q in queries], dtype=int)
    else:
        d2 = ((queries[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d2, axis=1)
    return idx, pts[idx] - queries


# -- policy features ---------------------------------------------------------


def link_representative_points(desc: HandDescription, link_positions,
                               link_rotations) -> np.ndarray:
    """First collision-sphere center of every link, in world coordinates."""
    centers = np.stack([lk.sphere_centers[0] for lk in desc.links])
    return link_positions + np.einsum("nij,nj->ni", link_rotations, centers)


def link_distances(desc: HandDescription, link_positions, link_rotations,
                   cloud: PointCloud, grid: VoxelGrid | None = None):
    """Per-link displacement to the nearest surface point and its norm.

    The displacement runs from the link's representative point (first
    sphere center, offset to the sphere surface along the nearest-point
    direction) to the nearest cloud point, in the cloud's frame.
    """
    reps = link_representative_points(desc, link_positions, link_rotations)
    radii = np.array([lk.sphere_radii[0] for lk in desc.links])
    _, vec_center = nearest_points(reps, cloud.points, grid)
    dist_center = np.linalg.norm(vec_center, axis=1)
    safe = np.maximum(dist_center, 1e-12)
    unit = vec_center / safe[:, None]
    unit[dist_center < 1e-12] = np.array([0.0, 0.0, 1.0])
    surface_dist = dist_center - radii
    vectors = unit * surface_dist[:, None]
    return vectors, np.abs(surface_dist)


def table_distance(desc: HandDescription, link_positions, link_rotations,
                   table_height: float) -> np.ndarray:
    """Signed vertical clearance of each link's closest sphere to the table."""
    out = np.empty(desc.num_links)
    for l, lk in enumerate(desc.links):
        centers = link_positions[l] + lk.sphere_centers @ link_rotations[l].T
        out[l] = np.min(centers[:, 2] - lk.sphere_radii) - table_height
    return out


def bps_encode(cloud: PointCloud, config: BpsConfig,
               grid: VoxelGrid | None = None) -> np.ndarray:
    """Nearest-surface distance from each basis point (wrist-frame cloud)."""
    if cloud.frame != WRIST:
        raise FrameError("bps_encode expects a wrist-frame cloud")
    _, vec = nearest_points(config.basis_points, cloud.points, grid)
    return np.linalg.norm(vec, axis=1)


# -- simulated partial view --------------------------------------------------


def partial_view(shape_points, shape_normals, camera: Pose,
                 grid_resolution: int = 64) -> PointCloud:
    """Visible subset of a dense surface cloud from a pinhole at `camera`.

    Deterministic z-buffer over a fixed angular grid spanning the cloud's
    angular bounding cone as seen from the camera position.
    """
    pts = np.asarray(shape_points, dtype=float).reshape(-1, 3)
    normals = np.asarray(shape_normals, dtype=float).reshape(-1, 3)
    rel = pts - camera.position
    dist = np.linalg.norm(rel, axis=1)
    if np.any(dist < 1e-9):
        raise ValueError("camera lies on the object surface")
    center = pts.mean(axis=0)
    fwd = center - camera.position
    fwd_n = np.linalg.norm(fwd)
    if fwd_n < 1e-9:
        raise ValueError("camera is inside the object")
    fwd = fwd / fwd_n
    ref = np.array([0.0, 0.0, 1.0]) if abs(fwd[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    right = np.cross(fwd, ref)
    right /= np.linalg.norm(right)
    up = np.cross(right, fwd)

    x = rel @ right
    y = rel @ up
    z = rel @ fwd
    if np.any(z <= 0):
        # Points behind the camera are simply not visible.
        pass
    u = np.arctan2(x, z)
    v = np.arctan2(y, z)
    half = max(np.abs(u).max(), np.abs(v).max()) * 1.0001 + 1e-9
    iu = np.clip(((u + half) / (2 * half) * grid_resolution).astype(int),
                 0, grid_resolution - 1)
    iv = np.clip(((v + half) / (2 * half) * grid_resolution).astype(int),
                 0, grid_resolution - 1)
    cell = iu * grid_resolution + iv
    visible = np.full(grid_resolution * grid_resolution, -1, dtype=int)
    best = np.full(grid_resolution * grid_resolution, np.inf)
    facing = np.einsum("ij,ij->i", normals, -rel) > 0  # normal toward camera
    for i in np.flatnonzero((z > 0) & facing):
        c = cell[i]
        if dist[i] < best[c]:
            best[c] = dist[i]
            visible[c] = i
    keep = np.unique(visible[visible >= 0])
    if len(keep) == 0:
        raise ValueError("no visible points from this camera pose")
    return PointCloud(pts[keep], normals[keep], frame=WORLD)
