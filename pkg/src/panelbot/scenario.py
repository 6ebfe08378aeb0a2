"""Scenario documents: generation, YAML round-trip, derived cameras.

A scenario bundles one arena (lidar world) and one panel-face scene. Keys
carry their units (``_m``, ``_mm``, ``_deg``, ``_px``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import PinholeCamera, StereoRig
from .scene_sim import (ArenaSpec, Distractor, LaserSpec, PanelPlacement, PanelSceneSpec, ValveSpec,
                        WrenchSpec, boundary_walls, facing_camera)

WRENCH_SIZES_MM = (16.0, 19.0, 22.0, 24.0, 27.0, 30.0, 32.0)
FORMAT_VERSION = 1


@dataclass(frozen=True)
class MissionConfig:
    dock_distance: float = 0.8  # m, robot centre to panel face
    target_width: float = 24.0  # mm, commanded wrench size
    width_tolerance: float = 1.5  # mm
    camera_distance: float = 0.85  # m, inspection camera to panel face
    camera_height: float = -0.04  # m, panel-face y of the inspection camera
    valve_camera_distance: float = 0.35  # m
    stereo_baseline: float = 0.1  # m
    fx: float = 1300.0
    image_width: int = 964
    image_height: int = 724
    image_noise: float = 4.0
    image_gradient: float = 20.0
    cloud_noise: float = 0.002  # m
    cloud_outliers: float = 0.2
    dock_noise: float = 0.005  # m, execution error of the docking controller
    dock_heading_noise: float = 0.3  # deg
    slip_probability: float = 0.1
    frames: int = 10


@dataclass(frozen=True)
class Scenario:
    arena: ArenaSpec
    scene: PanelSceneSpec
    start: tuple[float, float, float]
    waypoints: tuple
    laser: LaserSpec = LaserSpec(range_noise_sigma=0.01)
    mission: MissionConfig = MissionConfig()
    seed: int = 0

    def inspection_camera(self, distance: Optional[float] = None) -> PinholeCamera:
        m = self.mission
        return facing_camera(0.0, m.camera_height, m.camera_distance if distance is None else distance,
                             m.fx, m.image_width, m.image_height)

    def valve_rig(self, distance: Optional[float] = None) -> StereoRig:
        """Rectified pair centred on the valve stem, ``distance`` from the stem top."""
        m = self.mission
        v = self.scene.valve
        d = (m.valve_camera_distance if distance is None else distance) + self.scene.stem_height / 1000.0
        left = facing_camera(v.x / 1000.0 - m.stereo_baseline / 2, v.y / 1000.0, d, m.fx,
                             m.image_width, m.image_height)
        return StereoRig.rectified(left, m.stereo_baseline)


# --- generation -----------------------------------------------------------


def random_panel_scene(rng: np.random.Generator, target_width: float = 24.0, side: str = "near",
                       spacing: float = 95.0, row_y: float = -40.0, tilt: float = 8.0) -> PanelSceneSpec:
    """Six wrenches in a row, exactly two of the commanded size, plus a valve."""
    others = [s for s in WRENCH_SIZES_MM if abs(s - target_width) >= 2.5]
    if len(others) < 4:
        raise ConfigError(f"not enough distinct sizes around {target_width} mm")
    picked = list(rng.choice(others, size=4, replace=False)) + [target_width, target_width]
    order = rng.permutation(6)
    sizes = [float(picked[k]) for k in order]
    usable = [i for i, s in enumerate(sizes) if s == target_width]
    wrenches = []
    for i, s in enumerate(sizes):
        wrenches.append(WrenchSpec(
            head_width=s,
            handle_length=round(4.5 * s, 3),
            x=round((i - 2.5) * spacing + float(rng.uniform(-4, 4)), 3),
            y=round(row_y + float(rng.uniform(-4, 4)), 3),
            orientation=round(90.0 + float(rng.uniform(-tilt, tilt)), 3),
        ))
    valve = ValveSpec(edge=target_width, x=round(float(rng.uniform(-120, 120)), 3),
                      y=round(float(rng.uniform(95, 115)), 3), angle=round(float(rng.uniform(0, 90)), 3))
    return PanelSceneSpec(tuple(wrenches), usable[0], usable[1], valve, side=side)


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def _blocks(corners: np.ndarray, eye, targets) -> bool:
    k = len(corners)
    edges = [(corners[0], corners[1])] if k == 2 else [(corners[i], corners[(i + 1) % k]) for i in range(k)]
    for t in targets:
        for a, b in edges:
            if _segments_cross(eye, t, a, b):
                return True
    return False


DISTRACTOR_KINDS = {
    # kind: (length range m, depth m)
    "barrier": ((4.0, 8.0), 0.0),
    "drone": ((0.5, 0.7), 0.5),
    "van": ((5.5, 6.5), 2.5),
    "pole": ((0.2, 0.3), 0.2),
}


def random_arena(rng: np.random.Generator, n_distractors: Optional[int] = None,
                 panel_dims=(1.8, 0.3)) -> tuple[ArenaSpec, tuple]:
    """Arena with the panel on the far side, patrol waypoints and static distractors."""
    bounds = (0.0, 0.0, 60.0, 50.0)
    waypoints = ((36.0, 17.0, 0.0), (36.0, 33.0, 0.0))
    px, py = float(rng.uniform(41.0, 46.0)), float(rng.uniform(14.0, 36.0))
    near = min(waypoints, key=lambda w: math.hypot(w[0] - px, w[1] - py))
    bearing = math.degrees(math.atan2(near[1] - py, near[0] - px))
    # long axis across the line of sight, front face towards the waypoint
    heading = bearing - 90.0 + float(rng.uniform(-45.0, 45.0))
    panel = PanelPlacement(round(px, 4), round(py, 4), round(heading % 360.0, 4), *panel_dims)
    n = int(rng.integers(3, 6)) if n_distractors is None else n_distractors
    placed: list[Distractor] = []
    sight = [tuple(c) for c in panel.corners()] + [(panel.x, panel.y)]
    attempts = 0
    while len(placed) < n:
        attempts += 1
        if attempts > 5000:
            raise ConfigError("could not place distractors")
        kind = list(DISTRACTOR_KINDS)[int(rng.integers(len(DISTRACTOR_KINDS)))]
        (lo, hi), depth = DISTRACTOR_KINDS[kind]
        d = Distractor(kind, round(float(rng.uniform(26.0, 48.0)), 4), round(float(rng.uniform(10.0, 40.0)), 4),
                       round(float(rng.uniform(0.0, 180.0)), 4), round(float(rng.uniform(lo, hi)), 4), depth)
        corners = d.corners()
        if any(math.hypot(c[0] - w[0], c[1] - w[1]) > 14.0 for c in corners for w in waypoints):
            continue
        if any(math.hypot(c[0] - w[0], c[1] - w[1]) < 1.5 for c in corners for w in waypoints):
            continue
        centre = np.array([d.x, d.y])
        if np.min(np.linalg.norm(panel.corners() - centre, axis=1)) < 2.5 + d.length / 2:
            continue
        if any(np.hypot(o.x - d.x, o.y - d.y) < 2.0 + (o.length + d.length) / 2 for o in placed):
            continue
        if any(_blocks(corners, w[:2], sight) for w in waypoints):
            continue
        if any(_blocks(o.corners(), w[:2], [tuple(c) for c in corners]) for o in placed for w in waypoints):
            continue
        placed.append(d)
    arena = ArenaSpec(bounds, panel, boundary_walls(bounds), tuple(placed))
    return arena, waypoints


def generate_scenario(seed: int, side: str = "near", target_width: float = 24.0,
                      n_distractors: Optional[int] = None, mission: Optional[MissionConfig] = None) -> Scenario:
    rng = np.random.default_rng(seed)
    arena, waypoints = random_arena(rng, n_distractors)
    scene = random_panel_scene(rng, target_width, side)
    m = mission or MissionConfig(target_width=target_width)
    return Scenario(arena, scene, (5.0, 25.0, 0.0), waypoints, mission=m, seed=seed)


# --- YAML I/O -------------------------------------------------------------


def _f(x) -> float:
    return float(x)


def scenario_to_dict(sc: Scenario) -> dict:
    a, s, m = sc.arena, sc.scene, sc.mission
    return {
        "format_version": FORMAT_VERSION,
        "seed": int(sc.seed),
        "arena": {
            "bounds_m": [_f(b) for b in a.bounds],
            "walls_m": [[[_f(c) for c in p] for p in w] for w in a.walls],
            "panel": {"x_m": _f(a.panel.x), "y_m": _f(a.panel.y), "heading_deg": _f(a.panel.heading),
                      "width_m": _f(a.panel.width), "thickness_m": _f(a.panel.thickness)},
            "distractors": [{"kind": d.kind, "x_m": _f(d.x), "y_m": _f(d.y), "heading_deg": _f(d.heading),
                             "length_m": _f(d.length), "depth_m": _f(d.depth)} for d in a.distractors],
        },
        "robot": {
            "start": dict(zip(("x_m", "y_m", "heading_deg"), map(_f, sc.start))),
            "waypoints": [dict(zip(("x_m", "y_m", "heading_deg"), map(_f, w))) for w in sc.waypoints],
        },
        "laser": {"fov_deg": _f(sc.laser.fov), "resolution_deg": _f(sc.laser.angular_resolution),
                  "max_range_m": _f(sc.laser.max_range), "min_range_m": _f(sc.laser.min_range),
                  "noise_sigma_m": _f(sc.laser.range_noise_sigma)},
        "panel_scene": {
            "side": s.side,
            "target_index": int(s.target_index),
            "backup_index": int(s.backup_index),
            "standoff_mm": _f(s.standoff),
            "stem_height_mm": _f(s.stem_height),
            "wrenches": [{"head_width_mm": _f(w.head_width), "handle_length_mm": _f(w.handle_length),
                          "x_mm": _f(w.x), "y_mm": _f(w.y), "orientation_deg": _f(w.orientation)}
                         for w in s.wrenches],
            "valve": {"edge_mm": _f(s.valve.edge), "x_mm": _f(s.valve.x), "y_mm": _f(s.valve.y),
                      "angle_deg": _f(s.valve.angle)},
        },
        "mission": asdict(m),
    }


def _pose(d) -> tuple[float, float, float]:
    return (float(d["x_m"]), float(d["y_m"]), float(d["heading_deg"]))


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        if int(doc.get("format_version", 0)) != FORMAT_VERSION:
            raise ConfigError(f"unsupported scenario format_version {doc.get('format_version')!r}")
        a = doc["arena"]
        p = a["panel"]
        panel = PanelPlacement(float(p["x_m"]), float(p["y_m"]), float(p["heading_deg"]),
                               float(p["width_m"]), float(p["thickness_m"]))
        walls = tuple(tuple(tuple(float(c) for c in pt) for pt in w) for w in a.get("walls_m", []))
        distractors = tuple(Distractor(d["kind"], float(d["x_m"]), float(d["y_m"]), float(d["heading_deg"]),
                                       float(d["length_m"]), float(d.get("depth_m", 0.0)))
                            for d in a.get("distractors", []))
        arena = ArenaSpec(tuple(float(b) for b in a["bounds_m"]), panel, walls, distractors)
        ps = doc["panel_scene"]
        wrenches = tuple(WrenchSpec(float(w["head_width_mm"]), float(w["handle_length_mm"]), float(w["x_mm"]),
                                    float(w["y_mm"]), float(w["orientation_deg"])) for w in ps["wrenches"])
        v = ps["valve"]
        scene = PanelSceneSpec(wrenches, int(ps["target_index"]), int(ps["backup_index"]),
                               ValveSpec(float(v["edge_mm"]), float(v["x_mm"]), float(v["y_mm"]), float(v["angle_deg"])),
                               side=ps.get("side", "near"), standoff=float(ps.get("standoff_mm", 30.0)),
                               stem_height=float(ps.get("stem_height_mm", 40.0)))
        las = doc.get("laser", {})
        laser = LaserSpec(float(las.get("fov_deg", 270.0)), float(las.get("resolution_deg", 0.25)),
                          float(las.get("max_range_m", 50.0)), float(las.get("min_range_m", 0.5)),
                          float(las.get("noise_sigma_m", 0.01)))
        mission = MissionConfig(**doc.get("mission", {}))
        robot = doc["robot"]
        return Scenario(arena, scene, _pose(robot["start"]), tuple(_pose(w) for w in robot["waypoints"]),
                        laser, mission, int(doc.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed scenario document: {exc}") from exc


def dump_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: not a scenario document")
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(sc), encoding="utf-8")


def with_overrides(sc: Scenario, overrides: dict) -> Scenario:
    """Apply ``mission.<field>`` / ``laser.<field>`` overrides (values already parsed)."""
    mission, laser = {}, {}
    for key, value in overrides.items():
        group, _, name = key.partition(".")
        try:
            if group == "mission" and name in MissionConfig.__dataclass_fields__:
                mission[name] = type(getattr(sc.mission, name))(value)
            elif group == "laser" and name in LaserSpec.__dataclass_fields__:
                laser[name] = float(value)
            else:
                raise ConfigError(f"unknown override {key!r}")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {value!r}") from exc
    return replace(sc, mission=replace(sc.mission, **mission), laser=replace(sc.laser, **laser))
