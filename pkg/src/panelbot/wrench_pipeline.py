"""Wrench head to grasp point, grip centre and orientation, with median accumulation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (DegenerateInputError, EmptyHandleBoxError, IncompleteWindowError, OpenJawNotFound,
                     SegmentationFailure, TargetNotFound)
from .cascade_detector import detect, iou
from .fitting import ransac_plane
from .scene_sim import HEAD_RADIUS_RATIO, WINDOW_RATIO
from .geometry import PinholeCamera, Plane, as_points, ray_plane_intersection, two_point_angle
from .vision_ops import convex_hull, convexity_defects, crop, otsu_threshold, resize, trace_contours


@dataclass(frozen=True)
class HandleBox:
    box: tuple  # x, y, w, h
    clipped: bool


def extend_handle_bbox(head_bbox, image_shape: Optional[tuple] = None) -> HandleBox:
    """(x, y - 2h, w, 2h), clipped to the image when a shape is given."""
    x, y, w, h = head_bbox
    if w <= 0 or h <= 0:
        raise EmptyHandleBoxError(f"head box {tuple(head_bbox)} has no area")
    box = (x, y - 2 * h, w, 2 * h)
    if image_shape is None:
        return HandleBox(box, False)
    rows, cols = image_shape[:2]
    x0, y0 = max(box[0], 0), max(box[1], 0)
    x1, y1 = min(box[0] + box[2], cols), min(box[1] + box[3], rows)
    if x1 <= x0 or y1 <= y0:
        raise EmptyHandleBoxError("handle box lies outside the image")
    clipped = (x0, y0, x1 - x0, y1 - y0) != tuple(box)
    return HandleBox((x0, y0, x1 - x0, y1 - y0) if clipped else box, clipped)


def points_in_box(cloud: np.ndarray, box, camera: PinholeCamera) -> np.ndarray:
    """Camera-frame points whose projection falls inside ``box``."""
    pts = cloud[cloud[:, 2] > 0]
    uv = camera.project_camera(pts)
    x, y, w, h = box
    inside = (uv[:, 0] >= x) & (uv[:, 0] < x + w) & (uv[:, 1] >= y) & (uv[:, 1] < y + h)
    return pts[inside]


def segment_handle(cloud, handle_bbox=None, camera: Optional[PinholeCamera] = None, max_depth: float = 1.0,
                   depth_band: float = 0.015, plane_dist: float = 0.01, iters: int = 200,
                   seed: int = 0) -> tuple[np.ndarray, Plane]:
    """Depth cut, band around the mean depth, RANSAC plane; returns inliers and refit plane."""
    pts = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if handle_bbox is not None and camera is not None:
        pts = points_in_box(pts, handle_bbox, camera)
    pts = pts[pts[:, 2] <= max_depth]
    if len(pts) < 10:
        raise SegmentationFailure(f"{len(pts)} points within {max_depth} m")
    zbar = pts[:, 2].mean()
    pts = pts[np.abs(pts[:, 2] - zbar) <= depth_band]
    if len(pts) < 10:
        raise SegmentationFailure(f"{len(pts)} points within {depth_band} m of the mean depth")
    fit = ransac_plane(pts, iters, plane_dist, seed)
    inliers = pts[fit.inliers]
    if len(inliers) < 10:
        raise SegmentationFailure(f"only {len(inliers)} plane inliers")
    plane = fit.plane
    # orient the normal towards the camera for stable reporting
    if plane.c > 0:
        plane = Plane(-plane.a, -plane.b, -plane.c, -plane.d)
    return inliers, plane


def grasp_point(inliers) -> np.ndarray:
    pts = as_points(inliers)
    return pts.mean(axis=0)


@dataclass(frozen=True)
class JawGeometry:
    grip_center: np.ndarray  # (u, v), ROI pixels
    deep_point: np.ndarray
    tips: np.ndarray  # (2, 2)
    depth: float
    pixel: float = 1.0  # contour sampling step in ROI pixels

    @property
    def aperture(self) -> float:
        # tips are dark boundary samples, each half a step inside the jaw walls
        return float(np.linalg.norm(self.tips[0] - self.tips[1])) - self.pixel


def _contains(contour: np.ndarray, p) -> bool:
    x, y = contour[:, 0], contour[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    crosses = ((y > p[1]) != (yn > p[1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x + (p[1] - y) * (xn - x) / (yn - y)
    return bool(np.sum(crosses & (p[0] < xi)) % 2)


def _polygon_area(c: np.ndarray) -> float:
    x, y = c[:, 0].astype(float), c[:, 1].astype(float)
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def head_contour(roi: np.ndarray) -> np.ndarray:
    """Outer border of the dark blob under the ROI centre (largest if none covers it)."""
    _, bright = otsu_threshold(roi)
    dark = ~bright
    outer = [c for c in trace_contours(dark) if not c.is_hole and len(c.points) >= 8]
    if not outer:
        raise OpenJawNotFound("no foreground blob in the ROI")
    centre = (roi.shape[1] / 2.0, roi.shape[0] / 2.0)
    covering = [c for c in outer if _contains(c.points, centre)]
    pool = covering or outer
    return max(pool, key=lambda c: (_polygon_area(c.points), -c.label)).points


def head_grip_center(roi: np.ndarray, min_depth_ratio: float = 0.15, tie_px: float = 1.0,
                     upsample: int = 3) -> JawGeometry:
    """Grip centre as the centroid of (jaw tips, deepest jaw point).

    The jaw is the deepest convexity defect of the head blob. The ROI is
    resampled ``upsample`` times first so anti-aliased edges give sub-pixel
    borders; contour points within ``tie_px`` (original pixels) of the
    maximum depth are averaged into the deep point.
    """
    img = np.asarray(roi, dtype=float)
    k = max(int(upsample), 1)
    if k > 1:
        img = resize(img, (img.shape[0] * k, img.shape[1] * k))
    pts = head_contour(img)
    hull_idx = convex_hull(pts, return_indices=True)
    defects = convexity_defects(pts, hull_idx)
    limit = min_depth_ratio * min(img.shape)
    best = max(defects, key=lambda d: (d.depth, -d.start), default=None)
    if best is None or best.depth < limit:
        raise OpenJawNotFound(f"deepest defect {0 if best is None else best.depth / k:.1f} px "
                              f"below {limit / k:.1f} px")
    p, q = pts[best.start].astype(float), pts[best.end].astype(float)
    n = len(pts)
    span = (best.end - best.start) % n
    seg = pts[(best.start + np.arange(1, span)) % n].astype(float)
    edge = q - p
    d = np.abs(edge[0] * (seg[:, 1] - p[1]) - edge[1] * (seg[:, 0] - p[0])) / np.hypot(*edge)
    deep = seg[d >= d.max() - tie_px * k].mean(axis=0)
    # back to original pixel coordinates (pixel centres)
    to_orig = lambda a: (a + 0.5) / k - 0.5  # noqa: E731
    tips = to_orig(np.array([p, q]))
    deep = to_orig(deep)
    grip = (tips[0] + tips[1] + deep) / 3.0
    return JawGeometry(grip, deep, tips, float(d.max()) / k, 1.0 / k)


def head_orientation(center_2d, deep_2d) -> float:
    """Direction the jaw opens, degrees in (-180, 180]: from the deep point through the centre."""
    return two_point_angle(deep_2d, center_2d)


def lift_center_to_3d(center_2d, plane: Plane, camera: PinholeCamera) -> np.ndarray:
    return ray_plane_intersection(center_2d, camera, plane)


@dataclass(frozen=True)
class WrenchObservation:
    head_bbox: tuple
    handle_bbox: tuple
    grip_center_2d: np.ndarray
    grip_center_3d: np.ndarray
    orientation_deg: float
    grasp_point: np.ndarray
    handle_plane: Plane
    width_mm: float


def observe_wrench(image: np.ndarray, head_bbox, cloud: np.ndarray, camera: PinholeCamera,
                   seed: int = 0) -> WrenchObservation:
    """One frame of the per-wrench chain: ROI geometry, handle cloud, 3D lift."""
    roi = crop(image, head_bbox)
    x0, y0 = int(round(head_bbox[0])), int(round(head_bbox[1]))
    jaw = head_grip_center(roi)
    grip = jaw.grip_center + (x0, y0)
    deep = jaw.deep_point + (x0, y0)
    handle = extend_handle_bbox(head_bbox, image.shape)
    inliers, plane = segment_handle(cloud, handle.box, camera, seed=seed)
    centre_3d = lift_center_to_3d(grip, plane, camera)
    width = jaw.aperture * centre_3d[2] / camera.fx * 1000.0
    return WrenchObservation(tuple(float(c) for c in head_bbox), handle.box, grip, centre_3d,
                             head_orientation(grip, deep), grasp_point(inliers), plane, float(width))


@dataclass(frozen=True)
class AccumulatedEstimate:
    grip_center_3d: np.ndarray
    grasp_point: np.ndarray
    orientation_deg: float
    width_mm: float
    frame_count: int


def unwrap_to(reference: float, angles: Sequence[float], period: float = 360.0) -> np.ndarray:
    a = np.asarray(angles, dtype=float)
    return reference + (a - reference + period / 2) % period - period / 2


def circular_medoid(angles: Sequence[float], period: float = 360.0) -> float:
    """The sample angle with the smallest summed wrap-around distance to the others."""
    a = np.asarray(angles, dtype=float)
    d = np.abs((a[:, None] - a[None, :] + period / 2) % period - period / 2)
    return float(a[int(np.argmin(d.sum(axis=1)))])


def accumulate_median(observations: Sequence[WrenchObservation], window: int = 10) -> AccumulatedEstimate:
    if len(observations) < window:
        raise IncompleteWindowError(f"{len(observations)} of {window} frames")
    obs = list(observations)[-window:]
    grip = np.median(np.array([o.grip_center_3d for o in obs]), axis=0)
    grasp = np.median(np.array([o.grasp_point for o in obs]), axis=0)
    raw = [o.orientation_deg for o in obs]
    # unwrap around a robust reference so one bad first frame cannot split the cluster
    ang = unwrap_to(circular_medoid(raw), raw)
    width = float(np.median([o.width_mm for o in obs]))
    return AccumulatedEstimate(grip, grasp, float(np.median(ang)), width, len(obs))


def select_target(widths_mm: Sequence[float], target_width_mm: float,
                  tolerance_mm: float = 1.5) -> tuple[int, Optional[int]]:
    """Closest commanded-size wrench and, if any, a second one as backup."""
    cand = [(abs(w - target_width_mm), i) for i, w in enumerate(widths_mm)
            if w is not None and math.isfinite(w) and abs(w - target_width_mm) <= tolerance_mm]
    if not cand:
        raise TargetNotFound(f"no wrench within {tolerance_mm} mm of {target_width_mm} mm")
    cand.sort()
    return cand[0][1], (cand[1][1] if len(cand) > 1 else None)


# --- detection glue -------------------------------------------------------


def head_window_range(fx: float, depth_m: float, widths_mm=(16.0, 32.0), slack: float = 1.25) -> tuple[float, float]:
    """Detector window sizes (px) spanning heads of the given jaw widths at ``depth_m``."""
    side = [WINDOW_RATIO * 2 * HEAD_RADIUS_RATIO * w / 1000.0 * fx / depth_m for w in widths_mm]
    return min(side) / slack, max(side) * slack


def find_heads(image: np.ndarray, cascade, min_size: float, max_size: float, max_heads: int = 6,
               min_neighbors: int = 3) -> list[tuple[tuple, JawGeometry]]:
    """Detections that contain an open jaw, strongest first, at most ``max_heads``, sorted left to right."""
    kept = []
    for det in detect(image, cascade, min_size=min_size, max_size=max_size, min_neighbors=min_neighbors):
        box = tuple(int(round(c)) for c in det.bbox)
        if any(iou(box, k[0]) > 0.3 for k in kept):
            continue
        try:
            jaw = head_grip_center(crop(image, box))
        except (OpenJawNotFound, DegenerateInputError):
            continue
        kept.append((box, jaw))
        if len(kept) == max_heads:
            break
    return sorted(kept, key=lambda k: (k[0][0], k[0][1]))


def track_head(image: np.ndarray, cascade, box, slack: float = 1.12, margin: float = 0.25) -> tuple[tuple, bool]:
    """Re-detect one head near its previous box; keeps the old box when nothing fires."""
    x, y, w, h = box
    rx, ry = int(max(x - margin * w, 0)), int(max(y - margin * h, 0))
    rx1 = int(min(x + w + margin * w, image.shape[1]))
    ry1 = int(min(y + h + margin * h, image.shape[0]))
    region = image[ry:ry1, rx:rx1]
    dets = detect(region, cascade, min_size=w / slack, max_size=w * slack, min_neighbors=1)
    if not dets:
        return tuple(box), False
    bx, by, bw, bh = dets[0].bbox
    return (int(round(bx + rx)), int(round(by + ry)), int(round(bw)), int(round(bh))), True
