"""Mission state machine, patrol and valve-rotation waypoints, and the simulated closed loop."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .cascade_detector import Cascade, bundled_cascade
from .errors import ConfigError, IncompleteWindowError, PanelbotError, TargetNotFound
from .geometry import angular_difference, as_points, unit
from .panel_finder import find_panel, merged_base_points, simulate_docking, to_world
from .scenario import Scenario
from .scene_sim import apply_lighting, facing_camera, grasp_truth, render_clean, synthesize_handle_cloud, valve_truth, \
    wrench_truth
from .seeds import derive_seed, rng_for
from .valve_pipeline import estimate_valve
from .wrench_pipeline import (accumulate_median, extend_handle_bbox, find_heads, head_window_range, observe_wrench,
                              select_target, track_head)

log = logging.getLogger(__name__)


class MissionState(Enum):
    NavigatePatrol = "NavigatePatrol"
    ApproachPanel = "ApproachPanel"
    Dock = "Dock"
    InspectPanel = "InspectPanel"
    ChangeSide = "ChangeSide"
    RecognizeWrench = "RecognizeWrench"
    GraspWrench = "GraspWrench"
    AlignValve = "AlignValve"
    OperateValve = "OperateValve"
    WrenchLostRecovery = "WrenchLostRecovery"
    EmergencyStop = "EmergencyStop"
    Done = "Done"


class MissionEvent(Enum):
    PanelFound = "PanelFound"
    PanelNotFound = "PanelNotFound"
    Docked = "Docked"
    WrenchesVisible = "WrenchesVisible"
    WrenchesNotVisible = "WrenchesNotVisible"
    TargetRecognized = "TargetRecognized"
    GraspOk = "GraspOk"
    GraspWeak = "GraspWeak"
    WrenchLost = "WrenchLost"
    ValveAligned = "ValveAligned"
    RotationComplete = "RotationComplete"
    Emergency = "Emergency"
    Tick = "Tick"


S, E = MissionState, MissionEvent

_EDGES = {
    (S.NavigatePatrol, E.PanelFound): S.ApproachPanel,
    (S.NavigatePatrol, E.PanelNotFound): S.NavigatePatrol,
    (S.ApproachPanel, E.PanelFound): S.Dock,
    (S.ApproachPanel, E.PanelNotFound): S.NavigatePatrol,
    (S.Dock, E.Docked): S.InspectPanel,
    (S.Dock, E.PanelNotFound): S.NavigatePatrol,
    (S.InspectPanel, E.WrenchesVisible): S.RecognizeWrench,
    (S.InspectPanel, E.WrenchesNotVisible): S.ChangeSide,
    (S.ChangeSide, E.Docked): S.InspectPanel,
    (S.ChangeSide, E.PanelNotFound): S.NavigatePatrol,
    (S.RecognizeWrench, E.TargetRecognized): S.GraspWrench,
    (S.RecognizeWrench, E.WrenchesNotVisible): S.InspectPanel,
    (S.GraspWrench, E.GraspOk): S.AlignValve,
    (S.GraspWrench, E.GraspWeak): S.AlignValve,
    (S.GraspWrench, E.WrenchLost): S.WrenchLostRecovery,
    (S.AlignValve, E.ValveAligned): S.OperateValve,
    (S.AlignValve, E.Tick): S.AlignValve,
    (S.AlignValve, E.WrenchLost): S.WrenchLostRecovery,
    (S.OperateValve, E.RotationComplete): S.Done,
    (S.OperateValve, E.WrenchLost): S.WrenchLostRecovery,
    (S.WrenchLostRecovery, E.TargetRecognized): S.GraspWrench,
    (S.WrenchLostRecovery, E.WrenchesNotVisible): S.InspectPanel,
}


def build_table() -> dict:
    """Total map over S x A: listed edges, Emergency into EmergencyStop, self-loops elsewhere."""
    table = {}
    for s in MissionState:
        for e in MissionEvent:
            if s in (S.EmergencyStop, S.Done):
                table[(s, e)] = S.EmergencyStop if (s is S.Done and e is E.Emergency) else s
            elif e is E.Emergency:
                table[(s, e)] = S.EmergencyStop
            else:
                table[(s, e)] = _EDGES.get((s, e), s)
    return table


TRANSITIONS = build_table()


def is_defined(state: MissionState, event: MissionEvent) -> bool:
    """True for pairs with an explicit edge (Emergency counts as explicit)."""
    return event is E.Emergency or (state, event) in _EDGES or (state is S.NavigatePatrol and event is E.Tick)


def step(state: MissionState, event: MissionEvent, table: Optional[dict] = None) -> MissionState:
    table = TRANSITIONS if table is None else table
    if not is_defined(state, event) and state not in (S.EmergencyStop, S.Done):
        log.warning("no transition for (%s, %s); staying put", state.value, event.value)
    return table.get((state, event), state)


def patrol_next(waypoints: Sequence, current_index: int):
    if len(waypoints) == 0:
        raise ConfigError("patrol needs at least one waypoint")
    return waypoints[(current_index + 1) % len(waypoints)]


# --- valve rotation -------------------------------------------------------


@dataclass(frozen=True)
class EndEffectorPose:
    position: np.ndarray
    tangent: np.ndarray  # unit direction of travel
    angle_deg: float  # around the valve axis, from the in-plane x axis


def _circle_basis(axis) -> tuple[np.ndarray, np.ndarray]:
    z = unit(axis)
    seed = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = unit(seed - (seed @ z) * z)
    return e1, np.cross(z, e1)


def valve_rotation_waypoints(center, r: float, n: int = 36, clockwise: bool = True, start=None,
                             axis=(0.0, 0.0, 1.0)) -> list[EndEffectorPose]:
    """``n`` poses on the circle of radius ``r`` around ``center``, 360/n degrees apart.

    ``start`` (a point, e.g. the grasp point) sets the angle of the first pose.
    Clockwise steps are negative angles about ``axis``.
    """
    if not r > 0:
        raise ConfigError(f"rotation radius must be positive, got {r}")
    if n < 4:
        raise ConfigError(f"need at least 4 rotation waypoints, got {n}")
    c = as_points(center)[0]
    e1, e2 = _circle_basis(axis)
    theta0 = 0.0
    if start is not None:
        rel = as_points(start)[0] - c
        theta0 = math.degrees(math.atan2(rel @ e2, rel @ e1))
    sign = -1.0 if clockwise else 1.0
    out = []
    for k in range(n):
        ang = theta0 + sign * 360.0 * k / n
        t = math.radians(ang)
        pos = c + r * (math.cos(t) * e1 + math.sin(t) * e2)
        tan = sign * (-math.sin(t) * e1 + math.cos(t) * e2)
        out.append(EndEffectorPose(pos, tan, ang))
    return out


def sweep_deg(poses: Sequence[EndEffectorPose]) -> float:
    """Total signed angle travelled through the poses and back to the first one."""
    angs = [p.angle_deg for p in poses] + [poses[0].angle_deg]
    total = 0.0
    for a, b in zip(angs, angs[1:]):
        total += (b - a + 180.0) % 360.0 - 180.0
    return total


# --- closed loop ----------------------------------------------------------

CATEGORIES = ("Correct Recognition", "Correct Grasp", "Grasp", "Loss")


@dataclass(frozen=True)
class MissionTuning:
    panel_similarity: float = 0.8  # best candidate needed to declare the panel found
    patrol_cycles: int = 2
    correct_grasp_mm: float = 5.0
    weak_grasp_mm: float = 15.0
    weak_slip_factor: float = 2.0
    valve_attempts: int = 3
    rotation_steps: int = 36
    track_heads: bool = True
    min_heads: int = 3  # fewer validated heads counts as an empty face


@dataclass(frozen=True)
class TraceRow:
    tick: int
    state: MissionState
    event: MissionEvent
    next_state: MissionState
    payload: str = ""


@dataclass
class MissionReport:
    seed: int
    rows: list = field(default_factory=list)
    recognition_correct: Optional[bool] = None
    outcome: str = "Loss"
    changed_side: int = 0
    recoveries: int = 0
    metrics: dict = field(default_factory=dict)

    @property
    def final_state(self) -> MissionState:
        return self.rows[-1].next_state if self.rows else S.NavigatePatrol

    @property
    def scored(self) -> bool:
        return self.final_state is S.Done and self.outcome in ("Correct Grasp", "Grasp")

    def states(self) -> list:
        return [r.state for r in self.rows] + [self.final_state]

    def to_text(self) -> str:
        lines = [f"mission seed {self.seed}", f"{'tick':>4}  {'state':<18} {'event':<18} {'next':<18} payload"]
        for r in self.rows:
            lines.append(f"{r.tick:>4}  {r.state.value:<18} {r.event.value:<18} {r.next_state.value:<18} {r.payload}")
        lines.append("")
        lines.append(f"final state          {self.final_state.value}")
        rec = "n/a" if self.recognition_correct is None else ("yes" if self.recognition_correct else "no")
        lines.append(f"correct recognition  {rec}")
        lines.append(f"outcome              {self.outcome}")
        lines.append(f"side changes         {self.changed_side}")
        lines.append(f"recoveries           {self.recoveries}")
        for k in sorted(self.metrics):
            v = self.metrics[k]
            lines.append(f"{k:<20} {v:.4f}" if isinstance(v, float) else f"{k:<20} {v}")
        return "\n".join(lines) + "\n"


def category_counts(reports: Sequence[MissionReport]) -> dict:
    counts = dict.fromkeys(CATEGORIES, 0)
    for r in reports:
        if r.recognition_correct:
            counts["Correct Recognition"] += 1
        counts[r.outcome if r.outcome in CATEGORIES else "Loss"] += 1
    return counts


class _Loop:
    """Mutable mission state, owned by ``run_mission`` only."""

    def __init__(self, seed: int):
        self.state = S.NavigatePatrol
        self.tick = 0
        self.report = MissionReport(seed)

    def fire(self, event: MissionEvent, payload: str = "") -> MissionState:
        nxt = step(self.state, event)
        self.report.rows.append(TraceRow(self.tick, self.state, event, nxt, payload))
        self.state = nxt
        self.tick += 1
        return nxt


def _nearest_wrench(scene, camera, box) -> int:
    cx, cy = box[0] + box[2] / 2, box[1] + box[3] / 2
    d = [np.hypot(*(wrench_truth(scene, i, camera).center_px - (cx, cy))) for i in range(len(scene.wrenches))]
    return int(np.argmin(d))


def _dock_errors(scenario: Scenario, run) -> tuple[float, float, float, str]:
    """Offsets of the docked pose from the ideal one, and the face it ended up on."""
    est = run.estimate
    side = "near" if est.d >= 0 else "far"
    d = abs(est.d) - (0.0 if side == "near" else scenario.arena.panel.thickness)
    yaw = (est.alpha + 90.0) % 180.0 - 90.0
    return d - scenario.mission.dock_distance, est.o, yaw, side


def run_mission(scenario: Scenario, seed: int, tuning: MissionTuning = MissionTuning(),
                wrench_cascade: Optional[Cascade] = None, valve_cascade: Optional[Cascade] = None) -> MissionReport:
    """Patrol, dock, inspect, recognise, grasp, align, turn the valve; deterministic per seed."""
    wc = wrench_cascade or bundled_cascade("wrench")
    vc = valve_cascade or bundled_cascade("valve")
    m = scenario.mission
    arena, scene = scenario.arena, scenario.scene
    loop = _Loop(seed)
    rep = loop.report

    # patrol until a panel-like cluster shows up
    wps = list(scenario.waypoints)
    if not wps:
        raise ConfigError("scenario has no patrol waypoints")
    idx, found, best_seen = 0, None, None
    for visit in range(tuning.patrol_cycles * len(wps)):
        pose = wps[idx]
        base = merged_base_points(arena, pose, scenario.laser, derive_seed(seed, "patrol", visit))
        search = find_panel(to_world(base, pose), max_range=16.0, origin=pose[:2],
                            seed=derive_seed(seed, "find", visit))
        best = search.best
        if best is not None and (best_seen is None or best.similarity > best_seen[1]):
            best_seen = (pose, best.similarity)
        if best is not None and best.similarity >= tuning.panel_similarity:
            found = (pose, best.similarity)
            break
        loop.fire(E.PanelNotFound, f"waypoint {idx} best {0.0 if best is None else best.similarity:.3f}")
        idx = wps.index(patrol_next(wps, idx)) if len(wps) > 1 else 0
    if found is None:
        found = best_seen
    if found is None:
        loop.fire(E.Emergency, "no candidate in range of any waypoint")
        return rep
    loop.fire(E.PanelFound, f"similarity {found[1]:.3f}")

    run = simulate_docking(arena, found[0], scenario.laser, derive_seed(seed, "dock"), m.dock_distance,
                           m.dock_noise, m.dock_heading_noise)
    if run is None:
        loop.fire(E.PanelNotFound, "lost the panel on approach")
        loop.fire(E.Emergency, "approach failed")
        return rep
    loop.fire(E.PanelFound, "refined at close range")
    dd, do, dyaw, side = _dock_errors(scenario, run)
    rep.metrics.update(dock_d_error_m=float(dd), dock_o_error_m=float(do), dock_yaw_deg=float(dyaw))
    loop.fire(E.Docked, f"d {run.estimate.d:.3f} o {run.estimate.o:.3f} alpha {run.alpha_measured:.2f}")

    on_panel = abs(dd) < 0.3 and abs(do) < scenario.arena.panel.width / 2
    heads, camera, clean = [], None, None
    for attempt in range(2):
        camera = facing_camera(do, m.camera_height, m.camera_distance + dd, m.fx, m.image_width, m.image_height,
                               yaw_deg=dyaw)
        heads, clean = [], None
        if on_panel:
            clean = render_clean(scene, camera, visible_side=side)
            frame = apply_lighting(clean, derive_seed(seed, "frame", attempt, 0), m.image_noise, m.image_gradient)
            lo, hi = head_window_range(camera.fx, m.camera_distance + dd + scene.standoff / 1000.0)
            heads = find_heads(frame, wc, lo, hi)
            if len(heads) < tuning.min_heads:
                heads = []
        if heads:
            loop.fire(E.WrenchesVisible, f"{len(heads)} heads")
            break
        loop.fire(E.WrenchesNotVisible, f"{side} side")
        if attempt == 1:
            loop.fire(E.Emergency, "no wrenches on either side")
            return rep
        # drive around to the opposite face and dock again
        rep.changed_side += 1
        x, y, th = run.final_pose
        t = math.radians(th)
        hop = 2 * m.dock_distance + scenario.arena.panel.thickness
        start = (x + hop * math.sin(t), y - hop * math.cos(t), (th + 180.0) % 360.0)
        run = simulate_docking(arena, start, scenario.laser, derive_seed(seed, "dock", "other"), m.dock_distance,
                               m.dock_noise, m.dock_heading_noise)
        if run is None:
            loop.fire(E.PanelNotFound, "lost the panel on the other side")
            loop.fire(E.Emergency, "change side failed")
            return rep
        dd, do, dyaw, side = _dock_errors(scenario, run)
        on_panel = abs(dd) < 0.3 and abs(do) < scenario.arena.panel.width / 2
        loop.fire(E.Docked, f"{side} side d {run.estimate.d:.3f}")

    # per-frame observations for every head
    obs = [[] for _ in heads]
    boxes = [h[0] for h in heads]
    for f in range(m.frames):
        frame = apply_lighting(clean, derive_seed(seed, "frame", side, f), m.image_noise, m.image_gradient)
        cloud = np.vstack([synthesize_handle_cloud(scene, camera, m.cloud_noise, m.cloud_outliers,
                                                   derive_seed(seed, "cloud", f, i), index=i)
                           for i in range(len(scene.wrenches))])
        for k, box in enumerate(boxes):
            if f > 0 and tuning.track_heads:
                box, _ = track_head(frame, wc, box)
                boxes[k] = box
            try:
                obs[k].append(observe_wrench(frame, box, cloud, camera, seed=derive_seed(seed, "ransac", f, k)))
            except PanelbotError:
                continue
    estimates = []
    for o in obs:
        try:
            estimates.append(accumulate_median(o, m.frames))
        except IncompleteWindowError:
            estimates.append(None)
    widths = [e.width_mm if e is not None else float("nan") for e in estimates]
    rep.metrics["widths_mm"] = " ".join(f"{w:.2f}" for w in widths)
    try:
        best, backup = select_target(widths, m.target_width, m.width_tolerance)
    except TargetNotFound as exc:
        loop.fire(E.Emergency, f"target-not-found: {exc}")
        return rep
    usable = {scene.target_index, scene.backup_index}
    true_ids = [_nearest_wrench(scene, camera, b) for b in boxes]
    rep.recognition_correct = true_ids[best] in usable
    loop.fire(E.TargetRecognized, f"head {best} width {widths[best]:.2f} mm")

    rng = rng_for(seed, "grasp")
    queue = [best] + ([backup] if backup is not None else [])
    attempt_no = 0
    while queue:
        k = queue.pop(0)
        attempt_no += 1
        est, wid = estimates[k], true_ids[k]
        truth_box = extend_handle_bbox(wrench_truth(scene, wid, camera).box, clean.shape).box
        err_mm = float(np.linalg.norm(est.grasp_point - grasp_truth(scene, wid, camera, truth_box)) * 1000.0)
        rep.metrics[f"grasp_error_mm_{attempt_no}"] = err_mm
        if err_mm > tuning.weak_grasp_mm:
            rep.outcome = "Loss"
            if _recover(loop, rep, queue, f"grasp error {err_mm:.1f} mm"):
                continue
            return rep
        weak = err_mm > tuning.correct_grasp_mm
        rep.outcome = "Grasp" if weak else "Correct Grasp"
        loop.fire(E.GraspWeak if weak else E.GraspOk, f"grasp error {err_mm:.2f} mm")

        # align with the valve, stereo pair from the arm camera
        valve = None
        for attempt in range(tuning.valve_attempts):
            rig = scenario.valve_rig()
            lr = [apply_lighting(render_clean(scene, cam, visible_side=side),
                                 derive_seed(seed, "valve", attempt, j), m.image_noise, m.image_gradient)
                  for j, cam in enumerate((rig.left, rig.right))]
            try:
                valve = estimate_valve(lr[0], lr[1], rig, vc, scene.valve.edge / 1000.0, m.valve_camera_distance,
                                       seed=derive_seed(seed, "hough", attempt))
                break
            except PanelbotError as exc:
                loop.fire(E.Tick, f"valve attempt {attempt}: {exc}")
        if valve is None:
            rep.outcome = "Loss"
            loop.fire(E.Emergency, "valve-not-found")
            return rep
        vt = valve_truth(scene, rig.left)
        rep.metrics["valve_angle_error_deg"] = float(angular_difference(valve.stem_angle_deg, vt["angle"], 90.0))
        rep.metrics["valve_center_error_mm"] = float(np.linalg.norm(valve.center_3d - vt["center_world"]) * 1000)
        loop.fire(E.ValveAligned, f"angle {valve.stem_angle_deg:.2f} segments {valve.used_segments}")

        if scene.wrenches[wid].head_width != scene.valve.edge:
            rep.outcome = "Loss"
            if _recover(loop, rep, queue, "wrench does not fit the stem"):
                continue
            return rep
        p_slip = m.slip_probability * (tuning.weak_slip_factor if weak else 1.0)
        if rng.random() < p_slip:
            rep.outcome = "Loss"
            if _recover(loop, rep, queue, "wrench slipped"):
                continue
            return rep
        r = max(float(np.linalg.norm(est.grasp_point - est.grip_center_3d)), 1e-3)
        poses = valve_rotation_waypoints(est.grip_center_3d, r, tuning.rotation_steps, True, est.grasp_point)
        loop.fire(E.RotationComplete, f"{len(poses)} waypoints radius {r:.3f} m")
        return rep
    return rep


def _recover(loop: _Loop, rep: MissionReport, queue: list, why: str) -> bool:
    """WrenchLost, then either the backup (True) or an emergency stop (False)."""
    loop.fire(E.WrenchLost, why)
    rep.recoveries += 1
    if queue:
        loop.fire(E.TargetRecognized, f"backup head {queue[0]}")
        return True
    loop.fire(E.Emergency, "no backup wrench left")
    return False
