"""Find the panel in a merged 2D scan, rank candidates, and dock beside it."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import ContractViolation, InsufficientDataError
from .fitting import LineFit, ransac_line
from .geometry import Line3, ObbExtent, Plane, RigidTransform, as_points, line_plane_angle, obb_of_cluster
from .scene_sim import ArenaSpec, LaserScan, LaserSpec, PanelPlacement, pose_transform, simulate_scan

# base-frame mounts of the two lidars: (x, y, theta deg)
FRONT_MOUNT = (0.4, 0.0, 0.0)
BACK_MOUNT = (-0.4, 0.0, 180.0)
ROBOT_HALF_WIDTH = 0.3
# side of the robot that faces the panel once docked (y = -half width)
RIGHT_SIDE_PLANE = Plane(0.0, 1.0, 0.0, ROBOT_HALF_WIDTH)


@dataclass(frozen=True)
class Cluster:
    id: int
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PanelCandidate:
    cluster_id: int
    obb: tuple[RigidTransform, ObbExtent]
    similarity: float


@dataclass(frozen=True)
class DockingEstimate:
    d: float
    o: float
    alpha: float


def euclidean_cluster(points, tolerance: float = 0.3, min_size: int = 5) -> list[Cluster]:
    """Connected components of the graph joining points at most ``tolerance`` apart.

    Cluster ids follow the index of each component's first point.
    """
    if not tolerance > 0:
        raise ContractViolation("clustering tolerance must be positive")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return []
    pts = as_points(pts)
    n = len(pts)
    pairs = cKDTree(pts).query_pairs(tolerance, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # relabel by first occurrence so ids do not depend on scipy internals
    _, first = np.unique(labels, return_index=True)
    clusters = []
    for cid, start in enumerate(sorted(first)):
        members = np.flatnonzero(labels == labels[start])
        if len(members) >= min_size:
            clusters.append(Cluster(cid, pts[members]))
    return clusters


def line_filter(cluster: Cluster, ransac_iters: int = 200, inlier_dist: float = 0.03,
                max_outlier_ratio: float = 0.3, seed: int = 0) -> tuple[bool, LineFit]:
    fit = ransac_line(cluster.points, ransac_iters, inlier_dist, seed)
    return fit.outlier_ratio <= max_outlier_ratio, fit


def similarity(extent: ObbExtent, panel_dims: Sequence[float]) -> float:
    """exp(-L1 / width) between sorted extents and sorted panel dimensions."""
    dims = sorted((float(x) for x in panel_dims), reverse=True)
    ext = extent.sorted_desc()[: len(dims)]
    l1 = sum(abs(e - d) for e, d in zip(ext, dims))
    return math.exp(-l1 / dims[0])


def rank_candidates(clusters: Sequence[Cluster], panel_dims=(1.8, 0.3)) -> list[PanelCandidate]:
    if min(panel_dims) <= 0:
        raise ContractViolation("panel dimensions must be positive")
    out = []
    for c in clusters:
        obb = obb_of_cluster(c.points)
        out.append(PanelCandidate(c.id, obb, similarity(obb[1], panel_dims)))
    out.sort(key=lambda k: (-k.similarity, k.cluster_id))
    return out


@dataclass
class PanelSearch:
    clusters: list
    kept: list  # ids passing the line filter
    candidates: list
    lines: dict  # cluster id -> LineFit

    @property
    def best(self) -> Optional[PanelCandidate]:
        return self.candidates[0] if self.candidates else None


def find_panel(points, panel_dims=(1.8, 0.3), max_range: Optional[float] = 16.0, origin=(0.0, 0.0),
               tolerance: float = 0.3, min_size: int = 5, ransac_iters: int = 200,
               inlier_dist: float = 0.03, max_outlier_ratio: float = 0.3, seed: int = 0) -> PanelSearch:
    """Cluster, keep line-like clusters, rank what is left."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if max_range is not None and len(pts):
        pts = pts[np.hypot(pts[:, 0] - origin[0], pts[:, 1] - origin[1]) <= max_range]
    clusters = euclidean_cluster(pts, tolerance, min_size)
    kept, lines = [], {}
    for c in clusters:
        ok, fit = line_filter(c, ransac_iters, inlier_dist, max_outlier_ratio, seed + c.id)
        lines[c.id] = fit
        if ok:
            kept.append(c)
    return PanelSearch(clusters, [c.id for c in kept], rank_candidates(kept, panel_dims), lines)


def estimate_docking_angle(points, robot_side_plane: Plane = RIGHT_SIDE_PLANE,
                           panel_bearing_window=(-90.0, 45.0), max_range: float = 3.0,
                           ransac_iters: int = 200, inlier_dist: float = 0.03, seed: int = 0) -> float:
    """Angle in [0, 180] from the robot's forward axis to the panel line.

    ``points`` are base-frame returns, or a LaserScan already in the base frame.
    ``panel_bearing_window`` is (centre, half width) in degrees.
    """
    pts = points.points() if isinstance(points, LaserScan) else as_points(np.asarray(points, float).reshape(-1, 3))
    centre, half = panel_bearing_window
    bearing = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
    off = (bearing - centre + 180.0) % 360.0 - 180.0
    rng_ = np.hypot(pts[:, 0], pts[:, 1])
    sel = pts[(np.abs(off) <= half) & (rng_ <= max_range)]
    if len(sel) < 2:
        raise InsufficientDataError(f"{len(sel)} returns inside the panel bearing window")
    fit = ransac_line(sel, ransac_iters, inlier_dist, seed)
    return disambiguate_angle(fit.line, sel[fit.inliers], robot_side_plane)


def disambiguate_angle(line: Line3, panel_points: np.ndarray, side: Plane,
                       forward=(1.0, 0.0, 0.0), left=(0.0, 1.0, 0.0)) -> float:
    """Lift the [0, 90] line/plane angle to [0, 180] from the panel side of the plane."""
    alpha_p = 90.0 - line_plane_angle(line, side)
    alpha_p = min(max(alpha_p, 0.0), 90.0)
    n = side.normal
    denom = float(n @ line.direction)
    if abs(denom) < 1e-12 or alpha_p >= 90.0:
        return alpha_p
    # panel line meets the side plane here
    t = -float(side.signed_distance(line.point[None, :])[0]) * np.linalg.norm(n) / denom
    hit = line.point + t * line.direction
    dist = side.signed_distance(panel_points)
    closest = panel_points[int(np.argmin(np.abs(dist)))]
    nn = n / np.linalg.norm(n)
    projected = closest - (float(closest @ nn) + side.d / np.linalg.norm(n)) * nn
    sigma = 1.0 if float(np.mean(dist)) > 0 else -1.0
    along = float((projected - hit) @ np.asarray(forward, dtype=float))
    facing = float(nn @ np.asarray(left, dtype=float))
    if along * sigma * facing > 0:
        return alpha_p
    return 180.0 - alpha_p


def panel_frame(panel: PanelPlacement) -> RigidTransform:
    """World -> panel transform: origin at the front-face centre, x along the axis."""
    centre = np.array([panel.x, panel.y]) + panel.normal * panel.thickness / 2
    return pose_transform(centre[0], centre[1], panel.heading).inverse()


def docking_report(robot_pose, panel: PanelPlacement) -> DockingEstimate:
    """(d, o, alpha) of a planar robot pose against the true panel.

    d is measured from the front face along its normal, o along the panel axis,
    alpha is the panel axis direction seen from the robot's forward axis,
    folded into [0, 180).
    """
    local = panel_frame(panel).apply(np.array([[robot_pose[0], robot_pose[1], 0.0]]))[0]
    alpha = (panel.heading - robot_pose[2]) % 180.0
    return DockingEstimate(float(local[1]), float(local[0]), float(alpha))


def merged_base_points(arena: ArenaSpec, robot_pose, laser: LaserSpec, seed: int) -> np.ndarray:
    """Both lidars, expressed in the robot base frame."""
    front = simulate_scan(arena, robot_pose, laser, seed, FRONT_MOUNT)
    back = simulate_scan(arena, robot_pose, laser, seed + 1, BACK_MOUNT)
    f2b = pose_transform(*FRONT_MOUNT)
    b2b = pose_transform(*BACK_MOUNT)
    pts = [f2b.apply(front.points()), b2b.apply(back.points())]
    return np.vstack(pts)


def to_world(points: np.ndarray, robot_pose) -> np.ndarray:
    return pose_transform(*robot_pose).apply(points) if len(points) else points


def dock_goal(face_line: Line3, face_points: np.ndarray, viewer_xy, dock_distance: float):
    """Pose beside a fitted panel face: right side towards it, ``dock_distance`` off the face."""
    d = face_line.direction[:2] / np.linalg.norm(face_line.direction[:2])
    s = (face_points[:, :2] - face_line.point[:2]) @ d
    mid = face_line.point[:2] + d * (s.min() + s.max()) / 2
    n = np.array([-d[1], d[0]])
    if (np.asarray(viewer_xy) - mid) @ n < 0:
        n = -n
    goal = mid + n * dock_distance
    heading_vec = np.array([n[1], -n[0]])  # n rotated by -90 deg: left side points away
    return (float(goal[0]), float(goal[1]), math.degrees(math.atan2(heading_vec[1], heading_vec[0])))


@dataclass
class DockingRun:
    goal: tuple
    final_pose: tuple
    estimate: DockingEstimate
    alpha_measured: float


def simulate_docking(arena: ArenaSpec, start_pose, laser: LaserSpec, seed: int, dock_distance: float = 0.8,
                     noise: float = 0.005, heading_noise: float = 0.3,
                     panel_dims=(1.8, 0.3)) -> Optional[DockingRun]:
    """Locate the panel from ``start_pose``, approach, refine at close range, dock.

    Returns None when no line-like cluster is found.
    """
    rng = np.random.default_rng(seed)
    pose = tuple(start_pose)
    goal = None
    for phase in range(2):
        base = merged_base_points(arena, pose, laser, seed + 10 * phase)
        world = to_world(base, pose)
        search = find_panel(world, panel_dims, 16.0 if phase == 0 else 4.0, pose[:2], seed=seed)
        if search.best is None:
            return None
        cid = search.best.cluster_id
        fit = search.lines[cid]
        cluster = next(c for c in search.clusters if c.id == cid)
        goal = dock_goal(fit.line, cluster.points[fit.inliers], pose[:2], dock_distance)
        pose = (goal[0] + rng.normal(0, noise), goal[1] + rng.normal(0, noise),
                goal[2] + rng.normal(0, heading_noise))
    base = merged_base_points(arena, pose, laser, seed + 99)
    alpha = estimate_docking_angle(base, seed=seed)
    return DockingRun(goal, pose, docking_report(pose, arena.panel), alpha)
