"""Valve stem square from edge segments, its centre and angle, and stereo triangulation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import StereoMismatch, ValveNotFound
from .geometry import StereoRig, angular_difference, fold_angle, triangulate
from .cascade_detector import detect
from .scene_sim import VALVE_BODY_RATIO, WINDOW_RATIO
from .vision_ops import Segment2, canny, crop, probabilistic_hough

MAX_SEGMENTS = 24


@dataclass(frozen=True)
class CannyParams:
    low: float = 4.0
    high: float = 10.0
    sigma: float = 1.4


@dataclass(frozen=True)
class HoughParams:
    rho_res: float = 1.0
    theta_res: float = 1.0
    votes: int = 15
    min_len: float = 12.0
    max_gap: float = 3.0
    corridor: int = 1


@dataclass(frozen=True)
class SquareHypothesis:
    segments: tuple  # Segment2, 3 or 4
    indices: tuple  # endpoint tuples of the chosen segments, canonical order
    vertices: np.ndarray  # (4, 2), reconstructed corners in cyclic order
    center_2d: np.ndarray
    edge_px: float
    score: float


@dataclass(frozen=True)
class ValveEstimate:
    center_3d: np.ndarray
    stem_angle_deg: float
    used_segments: int
    center_left: np.ndarray
    center_right: np.ndarray


def extract_segments(roi: np.ndarray, canny_params: CannyParams = CannyParams(),
                     hough_params: HoughParams = HoughParams(), seed: int = 0) -> list[Segment2]:
    edges = canny(roi, canny_params.low, canny_params.high, canny_params.sigma)
    hp = hough_params
    return probabilistic_hough(edges, hp.rho_res, hp.theta_res, hp.votes, hp.min_len, hp.max_gap, seed, hp.corridor)


# --- square search --------------------------------------------------------


def _line(seg: Segment2):
    """Unit direction and a point; the direction is normalised to angle in [0, 180)."""
    t = math.radians(seg.angle)
    return np.array([math.cos(t), math.sin(t)]), (seg.p1 + seg.p2) / 2


def _intersect(a: Segment2, b: Segment2) -> Optional[np.ndarray]:
    da, pa = _line(a)
    db, pb = _line(b)
    m = np.column_stack([da, -db])
    if abs(np.linalg.det(m)) < 1e-9:
        return None
    s, _ = np.linalg.solve(m, pb - pa)
    return pa + s * da


def _offset(a: Segment2, b: Segment2) -> float:
    """Distance from b's midpoint to a's line."""
    da, pa = _line(a)
    n = np.array([-da[1], da[0]])
    return float(abs(n @ ((b.p1 + b.p2) / 2 - pa)))


def _gap(seg: Segment2, corner: np.ndarray) -> float:
    return float(min(np.linalg.norm(seg.p1 - corner), np.linalg.norm(seg.p2 - corner)))


def _split(segs, tol_parallel, tol_perp):
    """Two families of mutually parallel segments, perpendicular to each other."""
    ref = segs[0].angle
    fam_a = [s for s in segs if angular_difference(s.angle, ref, 180.0) <= tol_parallel]
    fam_b = [s for s in segs if angular_difference(s.angle, ref + 90.0, 180.0) <= tol_perp]
    if len(fam_a) + len(fam_b) != len(segs) or not fam_a or not fam_b:
        return None
    return fam_a, fam_b


def _angle_cost(fam_a, fam_b) -> float:
    cost = 0.0
    for fam in (fam_a, fam_b):
        for s, t in itertools.combinations(fam, 2):
            cost += angular_difference(s.angle, t.angle, 180.0)
    for s in fam_a:
        for t in fam_b:
            cost += abs(90.0 - angular_difference(s.angle, t.angle, 180.0))
    return cost


def _on_span(seg: Segment2, c0: np.ndarray, c1: np.ndarray, tol: float) -> bool:
    """Both endpoints lie between the two corners of their side, within ``tol``."""
    d = c1 - c0
    length = float(np.linalg.norm(d))
    if length == 0:
        return False
    d = d / length
    for p in (seg.p1, seg.p2):
        t = float(d @ (p - c0))
        if t < -tol or t > length + tol:
            return False
    return True


def _four(segs, edge, tol_vertex, tol_parallel, tol_perp):
    fams = _split(segs, tol_parallel, tol_perp)
    if fams is None or len(fams[0]) != 2:
        return None
    (a0, a1), (b0, b1) = fams
    sides = (_offset(a0, a1), _offset(b0, b1))
    if any(abs(s - edge) > tol_vertex for s in sides):
        return None
    # cyclic order a0-b0-a1-b1
    corners = [_intersect(a0, b0), _intersect(b0, a1), _intersect(a1, b1), _intersect(b1, a0)]
    if any(c is None for c in corners):
        return None
    corners = np.array(corners)
    owners = [(a0, (3, 0)), (b0, (0, 1)), (a1, (1, 2)), (b1, (2, 3))]
    gaps = []
    for seg, (i, j) in owners:
        if not _on_span(seg, corners[i], corners[j], tol_vertex):
            return None
        g = min(_gap(seg, corners[i]), _gap(seg, corners[j]))
        if g > tol_vertex:
            return None
        gaps.append(g)
    for k in range(4):
        g = min(_gap(seg, corners[k]) for seg, idx in owners if k in idx)
        if g > tol_vertex:
            return None
        gaps.append(g)
    return corners, float(np.mean(sides)), sum(gaps) + _angle_cost(*fams)


def _three(segs, edge, tol_vertex, tol_parallel, tol_perp):
    fams = _split(segs, tol_parallel, tol_perp)
    if fams is None:
        return None
    pair, lone = (fams[0], fams[1][0]) if len(fams[0]) == 2 else (fams[1], fams[0][0])
    if len(pair) != 2:
        return None
    side = _offset(pair[0], pair[1])
    if abs(side - edge) > tol_vertex:
        return None
    c0, c1 = _intersect(lone, pair[0]), _intersect(lone, pair[1])
    if c0 is None or c1 is None:
        return None
    if not _on_span(lone, c0, c1, tol_vertex):
        return None
    gaps = [_gap(lone, c0), _gap(lone, c1), _gap(pair[0], c0), _gap(pair[1], c1)]
    if max(gaps[2:]) > tol_vertex or min(gaps[:2]) > tol_vertex:
        return None
    # the missing side lies opposite the lone edge, towards the paired segments
    dl, pl = _line(lone)
    n = np.array([-dl[1], dl[0]])
    mid = (pair[0].p1 + pair[0].p2 + pair[1].p1 + pair[1].p2) / 4
    if n @ (mid - pl) < 0:
        n = -n
    corners = np.array([c0, c1, c1 + side * n, c0 + side * n])
    return corners, side, sum(gaps) + _angle_cost(*fams)


def find_square(segments: Sequence[Segment2], expected_edge_px: float, tol_vertex_px: Optional[float] = None,
                tol_parallel_deg: float = 5.0, tol_perp_deg: float = 5.0,
                min_length_ratio: float = 0.25) -> SquareHypothesis:
    """Best 4-segment square, else the best 3-segment one.

    Ties on score break on the sorted input indices, so the result does not
    depend on the order of ``segments``.
    """
    edge = float(expected_edge_px)
    tol = 0.1 * edge if tol_vertex_px is None else float(tol_vertex_px)
    keyed = [(s.u1, s.v1, s.u2, s.v2) for s in segments]
    ranked = sorted(range(len(segments)), key=lambda i: (-segments[i].length, keyed[i]))
    pool = [i for i in ranked
            if min_length_ratio * edge <= segments[i].length <= edge + 2 * tol][:MAX_SEGMENTS]
    # canonical order so permutations of the input give the same enumeration
    pool.sort(key=lambda i: keyed[i])
    # same family test as _split, tabulated once so hopeless combinations are skipped cheaply
    ang = [segments[i].angle for i in pool]
    par = [[angular_difference(a, b, 180.0) <= tol_parallel_deg for b in ang] for a in ang]
    perp = [[angular_difference(b, a + 90.0, 180.0) <= tol_perp_deg for b in ang] for a in ang]
    for k, test in ((4, _four), (3, _three)):
        best = None
        for combo in itertools.combinations(range(len(pool)), k):
            na = sum(par[combo[0]][c] for c in combo)
            nb = sum(perp[combo[0]][c] for c in combo)
            if na + nb != k or nb == 0 or (k == 4 and na != 2):
                continue
            segs = [segments[pool[c]] for c in combo]
            out = test(segs, edge, tol, tol_parallel_deg, tol_perp_deg)
            if out is None:
                continue
            key = (round(out[2], 9), combo)
            if best is None or key < best[0]:
                best = (key, segs, combo, out)
        if best is not None:
            _, segs, combo, (corners, side, score) = best
            return SquareHypothesis(tuple(segs), tuple(keyed[pool[c]] for c in combo), corners,
                                    corners.mean(axis=0), side, score)
    raise ValveNotFound(f"no square among {len(pool)} segments near {edge:.1f} px")


def valve_center_orientation(hyp: SquareHypothesis, edges: Optional[np.ndarray] = None) -> tuple[np.ndarray, float]:
    """Centre of the reconstructed corners and the longest edge's angle folded into [0, 90).

    With an edge map the angle comes from a least-squares line through the
    edge pixels under the longest segment instead of its two endpoints.
    """
    longest = max(hyp.segments, key=lambda s: (s.length, -s.u1, -s.v1))
    angle = longest.angle
    if edges is not None:
        refined = _refine_angle(longest, edges)
        if refined is not None:
            angle = refined
    return hyp.center_2d.copy(), fold_angle(angle, 90.0)


def _refine_angle(seg: Segment2, edges: np.ndarray, band: float = 1.5) -> Optional[float]:
    vs, us = np.nonzero(edges)
    pts = np.column_stack([us, vs]).astype(float)
    d, p = _line(seg)
    rel = pts - p
    along = rel @ d
    across = rel @ np.array([-d[1], d[0]])
    half = seg.length / 2
    sel = pts[(np.abs(across) <= band) & (np.abs(along) <= half)]
    if len(sel) < 5:
        return None
    c = sel - sel.mean(axis=0)
    _, vec = np.linalg.eigh(c.T @ c)
    u, v = vec[:, -1]
    return math.degrees(math.atan2(v, u)) % 180.0


def square_in_roi(roi: np.ndarray, expected_edge_px: float, seed: int = 0,
                  canny_params: CannyParams = CannyParams(), hough_params: HoughParams = HoughParams()):
    """Segments, square and (centre, angle) for one ROI; centre in ROI pixels."""
    edges = canny(roi, canny_params.low, canny_params.high, canny_params.sigma)
    hp = hough_params
    segs = probabilistic_hough(edges, hp.rho_res, hp.theta_res, hp.votes, hp.min_len, hp.max_gap, seed, hp.corridor)
    hyp = find_square(segs, expected_edge_px)
    center, angle = valve_center_orientation(hyp, edges)
    return hyp, center, angle


def triangulate_valve(center_left, center_right, rig: StereoRig, max_reprojection_px: float = 5.0) -> np.ndarray:
    cl, cr = np.asarray(center_left, float), np.asarray(center_right, float)
    if abs(cl[1] - cr[1]) > max_reprojection_px:
        raise StereoMismatch(f"rectified rows differ by {abs(cl[1] - cr[1]):.1f} px")
    point = triangulate(cl, cr, rig)
    for cam, px in ((rig.left, cl), (rig.right, cr)):
        err = float(np.linalg.norm(cam.project(point)[0] - px))
        if err > max_reprojection_px:
            raise StereoMismatch(f"reprojection error {err:.1f} px")
    return point


def valve_window_px(edge_px: float) -> float:
    """Detector window side for a stem of ``edge_px``: the valve body plus margin."""
    return WINDOW_RATIO * 2 * VALVE_BODY_RATIO * edge_px


def locate_in_view(image: np.ndarray, cascade, expected_edge_px: float, seed: int = 0,
                   size_slack: float = 1.35) -> tuple[np.ndarray, float, SquareHypothesis, tuple]:
    """Detector ROI, then the square inside it; centre in image pixels."""
    side = valve_window_px(expected_edge_px)
    dets = detect(image, cascade, min_size=side / size_slack, max_size=side * size_slack, min_neighbors=2)
    if not dets:
        raise ValveNotFound("the valve detector found no region")
    box = tuple(int(round(c)) for c in dets[0].bbox)
    hyp, center, angle = square_in_roi(crop(image, box), expected_edge_px, seed)
    return center + np.array(box[:2], float), angle, hyp, box


def estimate_valve(left: np.ndarray, right: np.ndarray, rig: StereoRig, cascade, edge_m: float,
                   depth_hint_m: float, seed: int = 0) -> ValveEstimate:
    """Stereo valve pose: centre triangulated from both views, angle from the left one."""
    edge_px = edge_m * rig.left.fx / depth_hint_m
    cl, angle, hyp, _ = locate_in_view(left, cascade, edge_px, seed)
    cr, _, _, _ = locate_in_view(right, cascade, edge_px, seed + 1)
    point = triangulate_valve(cl, cr, rig)
    return ValveEstimate(point, angle, len(hyp.segments), cl, cr)
