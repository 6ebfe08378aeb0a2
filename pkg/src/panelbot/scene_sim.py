"""Deterministic synthetic world.

Two loosely coupled parts live here:

* the arena: 2D segments seen by simulated planar lidars;
* the panel face: wrenches and the valve stem, rendered through a pinhole
  camera into 8-bit grayscale images, plus point clouds that stand in for
  dense stereo output.

Panel-face frame (meters): origin at the face center, X right, Y down, Z
pointing into the panel. Scene dimensions are given in millimeters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractViolation
from .geometry import PinholeCamera, Plane, RigidTransform, as_points, rot_z

# --- arena / lidar --------------------------------------------------------


@dataclass(frozen=True)
class PanelPlacement:
    x: float
    y: float
    heading: float  # degrees, direction of the long axis
    width: float
    thickness: float

    def __post_init__(self):
        if not self.width > self.thickness > 0:
            raise ConfigError("panel needs width > thickness > 0")

    @property
    def axis(self) -> np.ndarray:
        h = math.radians(self.heading)
        return np.array([math.cos(h), math.sin(h)])

    @property
    def normal(self) -> np.ndarray:
        """Outward normal of the front face (left of the long axis)."""
        a = self.axis
        return np.array([-a[1], a[0]])

    def corners(self) -> np.ndarray:
        c = np.array([self.x, self.y])
        a, n = self.axis * self.width / 2, self.normal * self.thickness / 2
        return np.array([c - a - n, c + a - n, c + a + n, c - a + n])


@dataclass(frozen=True)
class Distractor:
    kind: str
    x: float
    y: float
    heading: float
    length: float
    depth: float = 0.0  # 0 -> a single segment

    def corners(self) -> np.ndarray:
        h = math.radians(self.heading)
        a = np.array([math.cos(h), math.sin(h)]) * self.length / 2
        n = np.array([-math.sin(h), math.cos(h)]) * self.depth / 2
        c = np.array([self.x, self.y])
        if self.depth == 0:
            return np.array([c - a, c + a])
        return np.array([c - a - n, c + a - n, c + a + n, c - a + n])


@dataclass(frozen=True)
class ArenaSpec:
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    panel: PanelPlacement
    walls: tuple = ()
    distractors: tuple = ()

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError("arena bounds are empty")
        if not self.contains(self.panel.x, self.panel.y):
            raise ConfigError("panel lies outside the arena")

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def segments(self) -> tuple[np.ndarray, list[str]]:
        """All reflecting segments as an (S, 2, 2) array plus owner labels."""
        segs, owners = [], []

        def polygon(corners, owner):
            k = len(corners)
            if k == 2:
                segs.append(corners)
                owners.append(owner)
                return
            for i in range(k):
                segs.append(np.array([corners[i], corners[(i + 1) % k]]))
                owners.append(owner)

        for wall in self.walls:
            polygon(np.asarray(wall, dtype=float).reshape(2, 2), "wall")
        polygon(self.panel.corners(), "panel")
        for i, d in enumerate(self.distractors):
            polygon(d.corners(), f"distractor:{i}")
        if not segs:
            return np.zeros((0, 2, 2)), owners
        return np.array(segs, dtype=float), owners


def boundary_walls(bounds) -> tuple:
    xmin, ymin, xmax, ymax = bounds
    c = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]
    return tuple((c[i], c[(i + 1) % 4]) for i in range(4))


@dataclass(frozen=True)
class LaserSpec:
    fov: float = 270.0
    angular_resolution: float = 0.25
    max_range: float = 50.0
    min_range: float = 0.5
    range_noise_sigma: float = 0.0

    def __post_init__(self):
        if not (0 < self.fov <= 360 and self.angular_resolution > 0 and self.max_range > 0):
            raise ConfigError("invalid laser spec")

    @property
    def beam_count(self) -> int:
        return int(math.floor(self.fov / self.angular_resolution + 1e-9)) + 1


@dataclass(frozen=True)
class LaserScan:
    origin: tuple[float, float, float]  # sensor pose in the world (x, y, theta deg)
    start_angle: float  # degrees, relative to the sensor heading
    angular_resolution: float
    ranges: np.ndarray
    min_range: float = 0.5
    max_range: float = 50.0

    @property
    def bearings(self) -> np.ndarray:
        return self.start_angle + self.angular_resolution * np.arange(len(self.ranges))

    def points(self) -> np.ndarray:
        """Finite returns as (N, 3) points in the sensor frame (z = 0)."""
        r = self.ranges
        keep = np.isfinite(r)
        b = np.radians(self.bearings[keep])
        return np.column_stack([r[keep] * np.cos(b), r[keep] * np.sin(b), np.zeros(int(keep.sum()))])

    @classmethod
    def empty(cls) -> "LaserScan":
        return cls((0.0, 0.0, 0.0), 0.0, 1.0, np.zeros(0))


def pose_transform(x: float, y: float, theta: float) -> RigidTransform:
    """Planar pose as a 3D rigid transform (child frame -> parent frame)."""
    return RigidTransform(rot_z(theta), np.array([x, y, 0.0]))


def compose_pose(parent, child) -> tuple[float, float, float]:
    x, y, t = parent
    cx, cy, ct = child
    c, s = math.cos(math.radians(t)), math.sin(math.radians(t))
    return (x + c * cx - s * cy, y + s * cx + c * cy, t + ct)


def _ray_hits(origin: np.ndarray, dirs: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distance along each unit ray to the nearest segment, inf if none."""
    if len(segs) == 0:
        return np.full(len(dirs), np.inf)
    p = segs[:, 0, :]
    e = segs[:, 1, :] - p
    w = p - origin  # (S, 2)
    # cross products in 2D
    denom = dirs[:, 0:1] * e[None, :, 1] - dirs[:, 1:2] * e[None, :, 0]  # (B, S)
    t_num = w[None, :, 0] * e[None, :, 1] - w[None, :, 1] * e[None, :, 0]
    s_num = w[None, :, 0] * dirs[:, 1:2] - w[None, :, 1] * dirs[:, 0:1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = t_num / denom
        s = s_num / denom
    ok = (np.abs(denom) > 1e-12) & (t > 0) & (s >= 0) & (s <= 1)
    t = np.where(ok, t, np.inf)
    return t.min(axis=1)


def simulate_scan(arena: ArenaSpec, robot_pose, spec: LaserSpec = LaserSpec(), seed: int = 0,
                  mount=(0.0, 0.0, 0.0)) -> LaserScan:
    """Cast every beam against the arena segments.

    Noise is gaussian clamped at 4 sigma; the clamped range is kept within
    [min_range, max_range]. Beams that hit nothing, or only beyond
    ``max_range``, report ``inf``.
    """
    rx, ry, _ = robot_pose
    if not arena.contains(rx, ry):
        raise ConfigError(f"robot at ({rx}, {ry}) is outside the arena")
    sensor = compose_pose(robot_pose, mount)
    n = spec.beam_count
    start = -spec.fov / 2.0
    rel = start + spec.angular_resolution * np.arange(n)
    ang = np.radians(sensor[2] + rel)
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    segs, _ = arena.segments()
    true = _ray_hits(np.array(sensor[:2]), dirs, segs)
    rng = np.random.default_rng(seed)
    sigma = spec.range_noise_sigma
    noise = np.clip(rng.standard_normal(n) * sigma, -4 * sigma, 4 * sigma) if sigma > 0 else np.zeros(n)
    ranges = true + noise
    miss = ~np.isfinite(true) | (true > spec.max_range) | (true < spec.min_range)
    ranges = np.clip(ranges, spec.min_range, spec.max_range)
    ranges[miss] = np.inf
    return LaserScan(sensor, start, spec.angular_resolution, ranges, spec.min_range, spec.max_range)


def merge_scans(scan_a: LaserScan, scan_b: LaserScan, transform_ab: RigidTransform,
                base_from_a: Optional[RigidTransform] = None) -> np.ndarray:
    """Union of both scans' returns in one frame.

    ``transform_ab`` maps scan_b's sensor frame into scan_a's; the result is
    expressed in scan_a's frame, or in the base frame when ``base_from_a``
    is given. Duplicates are kept.
    """
    pa = scan_a.points()
    pb = scan_b.points()
    if len(pb):
        pb = transform_ab.apply(pb)
    merged = np.vstack([pa, pb]) if len(pa) + len(pb) else np.zeros((0, 3))
    if base_from_a is not None and len(merged):
        merged = base_from_a.apply(merged)
    return merged


# --- panel face scene -----------------------------------------------------

HEAD_RADIUS_RATIO = 1.15  # outer head radius / jaw width
DEEP_OFFSET_RATIO = -0.1  # slot bottom along the jaw axis, in jaw widths from the head center
HANDLE_WIDTH_RATIO = 0.5
WINDOW_RATIO = 1.3  # detector window side / head diameter
VALVE_BODY_RATIO = 1.6  # valve body radius / stem edge


@dataclass(frozen=True)
class WrenchSpec:
    head_width: float  # jaw opening, mm
    handle_length: float  # mm, from the head rim
    x: float  # head center on the panel face, mm
    y: float
    orientation: float  # jaw opening direction, degrees, image convention (90 = down)

    @property
    def head_radius(self) -> float:
        return HEAD_RADIUS_RATIO * self.head_width


@dataclass(frozen=True)
class ValveSpec:
    edge: float  # stem square edge, mm
    x: float
    y: float
    angle: float  # stem angle, degrees

    def __post_init__(self):
        if not self.edge > 0:
            raise ConfigError("valve edge must be positive")


@dataclass(frozen=True)
class PanelSceneSpec:
    wrenches: tuple
    target_index: int
    backup_index: int
    valve: ValveSpec
    side: str = "near"  # side of the panel carrying the tools
    standoff: float = 30.0  # wrench plane in front of the face, mm
    stem_height: float = 40.0  # stem top in front of the face, mm
    background: int = 190
    tool_level: int = 45
    valve_body_level: int = 125
    stem_level: int = 35

    def __post_init__(self):
        if len(self.wrenches) != 6:
            raise ConfigError(f"a panel carries exactly 6 wrenches, got {len(self.wrenches)}")
        usable = {self.target_index, self.backup_index}
        if len(usable) != 2 or not usable <= set(range(6)):
            raise ConfigError("target and backup must be two distinct wrench indices")
        if self.side not in ("near", "far"):
            raise ConfigError(f"unknown side {self.side!r}")

    @property
    def wrench_plane_z(self) -> float:
        return -self.standoff / 1000.0

    @property
    def stem_plane_z(self) -> float:
        return -self.stem_height / 1000.0


def facing_camera(x: float, y: float, distance: float, fx: float = 1300.0,
                  width: int = 964, height: int = 724, yaw_deg: float = 0.0) -> PinholeCamera:
    """Camera at panel-face coordinates (x, y) meters, ``distance`` in front, looking at the face."""
    c, s = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    pose = RigidTransform(rot, np.array([x, y, -distance]))
    return PinholeCamera(fx, fx, (width - 1) / 2.0, (height - 1) / 2.0, pose, width, height)


def _plane_coords(camera: PinholeCamera, z: float, u0: int, u1: int, v0: int, v1: int, ss: int):
    """Panel-frame (X, Y) in mm where supersampled pixel rays meet plane Z = z."""
    offs = (np.arange(ss) + 0.5) / ss - 0.5
    us = (np.arange(u0, u1)[:, None] + offs[None, :]).ravel()
    vs = (np.arange(v0, v1)[:, None] + offs[None, :]).ravel()
    uu, vv = np.meshgrid(us, vs)
    rays = np.stack([(uu - camera.cx) / camera.fx, (vv - camera.cy) / camera.fy, np.ones_like(uu)], axis=-1)
    rays = rays @ camera.pose.rotation.T
    c = camera.pose.translation
    t = (z - c[2]) / rays[..., 2]
    return (c[0] + t * rays[..., 0]) * 1000.0, (c[1] + t * rays[..., 1]) * 1000.0


def _local(X, Y, cx, cy, angle_deg):
    a = math.radians(angle_deg)
    dx, dy = X - cx, Y - cy
    return dx * math.cos(a) + dy * math.sin(a), -dx * math.sin(a) + dy * math.cos(a)


def wrench_mask(X, Y, w: WrenchSpec) -> np.ndarray:
    along, across = _local(X, Y, w.x, w.y, w.orientation)
    r = w.head_radius
    half = w.head_width / 2.0
    slot_base = DEEP_OFFSET_RATIO * w.head_width + half
    disc = along ** 2 + across ** 2 <= r ** 2
    slot = ((np.abs(across) < half) & (along >= slot_base)) | ((along - slot_base) ** 2 + across ** 2 < half ** 2)
    hw = HANDLE_WIDTH_RATIO * w.head_width / 2.0
    handle = (along <= -0.5 * r) & (along >= -r - w.handle_length) & (np.abs(across) <= hw)
    return (disc & ~slot) | handle


def handle_mask(X, Y, w: WrenchSpec) -> np.ndarray:
    along, across = _local(X, Y, w.x, w.y, w.orientation)
    r = w.head_radius
    hw = HANDLE_WIDTH_RATIO * w.head_width / 2.0
    return (along <= -r) & (along >= -r - w.handle_length) & (np.abs(across) <= hw)


def stem_mask(X, Y, v: ValveSpec) -> np.ndarray:
    along, across = _local(X, Y, v.x, v.y, v.angle)
    return (np.abs(along) <= v.edge / 2) & (np.abs(across) <= v.edge / 2)


def valve_body_mask(X, Y, v: ValveSpec) -> np.ndarray:
    return (X - v.x) ** 2 + (Y - v.y) ** 2 <= (VALVE_BODY_RATIO * v.edge) ** 2


def _pixel_window(camera: PinholeCamera, z: float, corners_mm) -> Optional[tuple[int, int, int, int]]:
    pts = np.array([[x / 1000.0, y / 1000.0, z] for x, y in corners_mm])
    cam = camera.world_to_camera(pts)
    if np.any(cam[:, 2] <= 0):
        return 0, camera.width, 0, camera.height
    uv = camera.project_camera(cam)
    u0 = max(0, int(math.floor(uv[:, 0].min())) - 2)
    u1 = min(camera.width, int(math.ceil(uv[:, 0].max())) + 3)
    v0 = max(0, int(math.floor(uv[:, 1].min())) - 2)
    v1 = min(camera.height, int(math.ceil(uv[:, 1].max())) + 3)
    if u0 >= u1 or v0 >= v1:
        return None
    return u0, u1, v0, v1


def _paint(canvas: np.ndarray, camera, z, bbox_mm, mask_fn, level: float, ss: int) -> None:
    x0, y0, x1, y1 = bbox_mm
    win = _pixel_window(camera, z, [(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    if win is None:
        return
    u0, u1, v0, v1 = win
    X, Y = _plane_coords(camera, z, u0, u1, v0, v1, ss)
    cover = mask_fn(X, Y).astype(float)
    cover = cover.reshape(v1 - v0, ss, u1 - u0, ss).mean(axis=(1, 3))
    region = canvas[v0:v1, u0:u1]
    region += cover * (level - region)


def _wrench_bbox_mm(w: WrenchSpec):
    r = w.head_radius
    pts = np.vstack([_handle_corners_mm(w), [[w.x - r, w.y - r], [w.x + r, w.y + r]]])
    lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
    return (lo[0], lo[1], hi[0], hi[1])


def render_clean(scene: PanelSceneSpec, camera: PinholeCamera, visible_side: str = "near",
                 ss: int = 2, draw_wrenches: bool = True, draw_valve: bool = True) -> np.ndarray:
    """Noise-free float render (values in 0..255)."""
    if camera.pose.translation[2] >= 0:
        raise ConfigError("camera is behind the panel face")
    axis = camera.pose.rotation @ np.array([0.0, 0.0, 1.0])
    if axis[2] <= 0:
        raise ConfigError("camera does not face the panel")
    canvas = np.full((camera.height, camera.width), float(scene.background))
    if scene.side != visible_side:
        return canvas
    v = scene.valve
    if draw_valve:
        rb = VALVE_BODY_RATIO * v.edge
        _paint(canvas, camera, 0.0, (v.x - rb, v.y - rb, v.x + rb, v.y + rb),
               lambda X, Y: valve_body_mask(X, Y, v), scene.valve_body_level, ss)
    if draw_wrenches:
        for w in scene.wrenches:
            _paint(canvas, camera, scene.wrench_plane_z, _wrench_bbox_mm(w),
                   lambda X, Y, w=w: wrench_mask(X, Y, w), scene.tool_level, ss)
    if draw_valve:
        e = v.edge
        _paint(canvas, camera, scene.stem_plane_z, (v.x - e, v.y - e, v.x + e, v.y + e),
               lambda X, Y: stem_mask(X, Y, v), scene.stem_level, ss)
    return canvas


def apply_lighting(clean: np.ndarray, seed: Optional[int], noise_sigma: float = 4.0,
                   gradient: float = 20.0) -> np.ndarray:
    """Add a seeded linear intensity ramp and gaussian noise, quantize to uint8."""
    img = clean.astype(float, copy=True)
    if seed is not None and (noise_sigma > 0 or gradient > 0):
        rng = np.random.default_rng(seed)
        h, w = img.shape
        theta = rng.uniform(0, 2 * math.pi)
        amp = rng.uniform(-gradient, gradient)
        vv, uu = np.mgrid[0:h, 0:w]
        img += amp * (math.cos(theta) * (uu / w - 0.5) + math.sin(theta) * (vv / h - 0.5))
        if noise_sigma > 0:
            img += rng.standard_normal(img.shape) * noise_sigma
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def render_panel_image(scene: PanelSceneSpec, camera: PinholeCamera, lighting_seed: Optional[int] = None,
                       noise_sigma: float = 4.0, gradient: float = 20.0, visible_side: str = "near") -> np.ndarray:
    """8-bit render of the panel face. ``lighting_seed=None`` gives the noiseless image."""
    return apply_lighting(render_clean(scene, camera, visible_side), lighting_seed, noise_sigma, gradient)


# --- ground truth ---------------------------------------------------------


def panel_point(x_mm: float, y_mm: float, z: float) -> np.ndarray:
    return np.array([x_mm / 1000.0, y_mm / 1000.0, z])


@dataclass
class WrenchTruth:
    center_px: np.ndarray  # head disc center
    box: tuple[float, float, float, float]  # canonical detector window (x, y, w, h)
    tips_px: np.ndarray  # (2, 2) jaw tips
    deep_px: np.ndarray
    grip_center_px: np.ndarray
    orientation: float
    aperture_px: float
    depth: float  # camera-frame z of the head center, m


def _local_to_panel(w: WrenchSpec, along: float, across: float) -> tuple[float, float]:
    a = math.radians(w.orientation)
    return (w.x + along * math.cos(a) - across * math.sin(a),
            w.y + along * math.sin(a) + across * math.cos(a))


def wrench_truth(scene: PanelSceneSpec, index: int, camera: PinholeCamera) -> WrenchTruth:
    w = scene.wrenches[index]
    z = scene.wrench_plane_z
    r, half = w.head_radius, w.head_width / 2
    tip_along = math.sqrt(r * r - half * half)
    pts_mm = [_local_to_panel(w, 0.0, 0.0), _local_to_panel(w, tip_along, -half),
              _local_to_panel(w, tip_along, half), _local_to_panel(w, DEEP_OFFSET_RATIO * w.head_width, 0.0)]
    world = np.array([panel_point(x, y, z) for x, y in pts_mm])
    cam = camera.world_to_camera(world)
    uv = camera.project_camera(cam)
    center, tips, deep = uv[0], uv[1:3], uv[3]
    grip = (tips[0] + tips[1] + deep) / 3.0
    side = WINDOW_RATIO * 2 * r / 1000.0 * camera.fx / cam[0, 2]
    box = (center[0] - side / 2, center[1] - side / 2, side, side)
    d = grip - deep
    orientation = math.degrees(math.atan2(d[1], d[0]))
    return WrenchTruth(center, box, tips, deep, grip, orientation,
                       float(np.linalg.norm(tips[0] - tips[1])), float(cam[0, 2]))


def handle_plane_camera(scene: PanelSceneSpec, camera: PinholeCamera) -> Plane:
    """The wrench plane expressed in the camera frame."""
    return Plane(0.0, 0.0, 1.0, -scene.wrench_plane_z).transformed(camera.pose.inverse())


def valve_truth(scene: PanelSceneSpec, camera: PinholeCamera) -> dict:
    v = scene.valve
    world = panel_point(v.x, v.y, scene.stem_plane_z)
    uv = camera.project(world)[0]
    return {"center_world": world, "center_px": uv, "angle": v.angle % 90.0,
            "edge_px": v.edge / 1000.0 * camera.fx / float(camera.world_to_camera(world)[0, 2])}


# --- point clouds ---------------------------------------------------------


def _handle_corners_mm(w: WrenchSpec) -> np.ndarray:
    r = w.head_radius
    hw = HANDLE_WIDTH_RATIO * w.head_width / 2.0
    loc = [(-r, -hw), (-r - w.handle_length, -hw), (-r - w.handle_length, hw), (-r, hw)]
    return np.array([_local_to_panel(w, a, b) for a, b in loc])


def sample_handle_face(w: WrenchSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the handle face, panel-face coordinates in mm."""
    r = w.head_radius
    hw = HANDLE_WIDTH_RATIO * w.head_width / 2.0
    along = -r - rng.uniform(0.0, w.handle_length, n)
    across = rng.uniform(-hw, hw, n)
    a = math.radians(w.orientation)
    x = w.x + along * math.cos(a) - across * math.sin(a)
    y = w.y + along * math.sin(a) + across * math.cos(a)
    return np.column_stack([x, y])


def synthesize_handle_cloud(scene: PanelSceneSpec, camera: PinholeCamera, noise_sigma: float = 0.0,
                            outlier_fraction: float = 0.0, seed: int = 0, index: Optional[int] = None,
                            n_points: int = 4000) -> np.ndarray:
    """Camera-frame cloud of one wrench handle plus panel-depth outliers.

    Exactly ``floor(outlier_fraction * n_points)`` points lie on the panel
    face behind the handle; the remainder sample the handle face with
    gaussian noise along the viewing ray.
    """
    if not 0.0 <= outlier_fraction < 0.5:
        raise ContractViolation("outlier_fraction must lie in [0, 0.5)")
    w = scene.wrenches[scene.target_index if index is None else index]
    rng = np.random.default_rng(seed)
    n_out = int(math.floor(outlier_fraction * n_points + 1e-9))
    n_in = n_points - n_out
    xy = sample_handle_face(w, n_in, rng)
    handle = np.column_stack([xy / 1000.0, np.full(n_in, scene.wrench_plane_z)])
    cam = camera.world_to_camera(handle)
    if noise_sigma > 0:
        dirs = cam / np.linalg.norm(cam, axis=1, keepdims=True)
        cam = cam + dirs * rng.standard_normal((n_in, 1)) * noise_sigma
    corners = _handle_corners_mm(w)
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    pad = w.head_width / 2
    ox = rng.uniform(lo[0] - pad, hi[0] + pad, n_out)
    oy = rng.uniform(lo[1] - pad, hi[1] + pad, n_out)
    outliers = np.column_stack([ox / 1000.0, oy / 1000.0, np.zeros(n_out)])
    out = np.vstack([cam, camera.world_to_camera(outliers)]) if n_out else cam
    return out


def grasp_truth(scene: PanelSceneSpec, index: int, camera: PinholeCamera, handle_box,
                samples: int = 400) -> np.ndarray:
    """Centroid of the handle face whose projection falls inside ``handle_box``.

    Dense regular sampling of the face; camera-frame meters.
    """
    w = scene.wrenches[index]
    r = w.head_radius
    hw = HANDLE_WIDTH_RATIO * w.head_width / 2.0
    along = -r - (np.arange(samples) + 0.5) / samples * w.handle_length
    across = ((np.arange(samples // 8) + 0.5) / (samples // 8) - 0.5) * 2 * hw
    aa, bb = np.meshgrid(along, across)
    a = math.radians(w.orientation)
    x = w.x + aa * math.cos(a) - bb * math.sin(a)
    y = w.y + aa * math.sin(a) + bb * math.cos(a)
    pts = np.column_stack([x.ravel() / 1000.0, y.ravel() / 1000.0, np.full(x.size, scene.wrench_plane_z)])
    cam = camera.world_to_camera(pts)
    uv = camera.project_camera(cam)
    bx, by, bw, bh = handle_box
    inside = (uv[:, 0] >= bx) & (uv[:, 0] < bx + bw) & (uv[:, 1] >= by) & (uv[:, 1] < by + bh)
    return cam[inside].mean(axis=0)


# --- file formats ---------------------------------------------------------


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ConfigError(f"{path}: truncated graymap header")
            pos = nl + 1
            continue
        if pos >= len(data):
            raise ConfigError(f"{path}: truncated graymap header")
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ConfigError(f"{path}: not a binary graymap")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise ConfigError(f"{path}: bad graymap header {tokens[1:]}") from None
    if maxval > 255:
        raise ConfigError(f"{path}: 16-bit graymaps are not supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise ConfigError(f"{path}: expected {w * h} pixels, found {pixels.size}")
    return pixels.reshape(h, w).copy()


def write_xyz(path, points) -> None:
    pts = as_points(points) if len(points) else np.zeros((0, 3))
    np.savetxt(path, pts, fmt="%.9f")


def read_xyz(path) -> np.ndarray:
    pts = np.loadtxt(path, ndmin=2)
    return pts.reshape(-1, 3)
