"""``panelbot`` command line: scenarios, each pipeline stage on its own, training, evaluation, missions.

Every command takes ``--seed``, writes ``<command>.txt`` plus figures and a
``manifest.json`` into ``--out``, and prints timing over ``--reps`` runs.
Exit status: 0 ok, 1 pipeline failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from . import reports
from .cascade_detector import Cascade, bundled_cascade, detect, evaluate, iou, train_cascade
from .datasets import build_dataset, valve_box
from .errors import ConfigError, InsufficientDataError, PanelbotError
from .geometry import angular_difference
from .mission import category_counts, run_mission
from .panel_finder import docking_report, find_panel, merged_base_points, simulate_docking, to_world
from .scenario import Scenario, dump_scenario, generate_scenario, load_scenario, save_scenario, with_overrides
from .scene_sim import (apply_lighting, grasp_truth, read_pgm, render_clean, render_panel_image,
                        synthesize_handle_cloud, valve_truth, wrench_truth, write_pgm, write_xyz)
from .seeds import derive_seed
from .valve_pipeline import estimate_valve
from .wrench_pipeline import (accumulate_median, extend_handle_bbox, find_heads, head_window_range, observe_wrench,
                              select_target)

U64 = (1 << 64) - 1


class UsageError(Exception):
    pass


@dataclass
class Context:
    command: str
    seed: int
    reps: int
    out: Path
    params: dict
    scenario: Optional[Scenario]
    inputs: list = field(default_factory=list)

    def rep_seed(self, r: int) -> int:
        return (self.seed + r) & U64

    def need_scenario(self) -> Scenario:
        if self.scenario is None:
            raise UsageError(f"{self.command} needs --scenario")
        return self.scenario


@dataclass
class Result:
    body: str
    timings: list
    timing_label: str
    artifacts: list = field(default_factory=list)
    failure: Optional[str] = None  # error label when the run produced nothing usable


def _timed(fn: Callable, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def _cascade(ctx: Context, kind: str) -> Cascade:
    path = ctx.params.get("cascade")
    if path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"cascade file {p} not found")
        ctx.inputs.append(p)
        try:
            return Cascade.load(p)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"{p} is not a cascade file: {exc}") from exc
    return bundled_cascade(kind)


def _kind(ctx: Context) -> str:
    kind = ctx.params["kind"]
    if kind not in ("wrench", "valve"):
        raise UsageError(f"kind must be wrench or valve, got {kind!r}")
    return kind


# --- commands -------------------------------------------------------------


def cmd_gen_scenario(ctx: Context) -> Result:
    p = ctx.params
    times, sc = [], None
    for r in range(ctx.reps):
        sc, dt = _timed(generate_scenario, ctx.seed, p["side"], float(p["target_width"]), p["n_distractors"])
        times.append(dt)
    if ctx.params.get("_scenario_overrides"):
        sc = with_overrides(sc, ctx.params["_scenario_overrides"])
    path = ctx.out / "scenario.yaml"
    save_scenario(sc, path)
    pan = sc.arena.panel
    rows = [[str(i), f"{w.head_width:g}", f"{w.x:.1f}", f"{w.y:.1f}", f"{w.orientation:.1f}",
             "target" if i == sc.scene.target_index else ("backup" if i == sc.scene.backup_index else "")]
            for i, w in enumerate(sc.scene.wrenches)]
    body = (f"scenario seed {ctx.seed}\n"
            f"panel x {pan.x:.3f} m y {pan.y:.3f} m heading {pan.heading:.2f} deg, tools on the {sc.scene.side} side\n"
            f"distractors {len(sc.arena.distractors)}\n"
            f"valve edge {sc.scene.valve.edge:g} mm angle {sc.scene.valve.angle:.2f} deg\n\n"
            + reports.table(["wrench", "width (mm)", "x (mm)", "y (mm)", "orientation (deg)", "role"], rows))
    return Result(body, times, "Scenario generation", [path])


def _panel_scan(sc: Scenario, pose, seed: int, max_range: float):
    base = merged_base_points(sc.arena, pose, sc.laser, derive_seed(seed, "scan"))
    world = to_world(base, pose)
    return world, find_panel(world, max_range=max_range, origin=pose[:2], seed=derive_seed(seed, "find"))


def cmd_find_panel(ctx: Context) -> Result:
    sc = ctx.need_scenario()
    wp = int(ctx.params["waypoint"])
    max_range = float(ctx.params["max_range"])
    targets = range(len(sc.waypoints)) if wp < 0 else [wp]
    if any(not 0 <= i < len(sc.waypoints) for i in targets):
        raise UsageError(f"waypoint {wp} out of range")
    pan = sc.arena.panel
    rows, times, first = [], [], None
    for r in range(ctx.reps):
        seed = ctx.rep_seed(r)
        for i in targets:
            (world, search), dt = _timed(_panel_scan, sc, sc.waypoints[i], seed, max_range)
            times.append(dt)
            if first is None:
                first = (world, search)
            for rank, cand in enumerate(search.candidates[:3], 1):
                cl = next(c for c in search.clusters if c.id == cand.cluster_id)
                dist = float(np.hypot(*(cl.points.mean(axis=0)[:2] - (pan.x, pan.y))))
                ext = cand.obb[1].sorted_desc()
                rows.append([str(r), str(i), str(rank), str(len(cl)), f"{ext[0]:.3f}", f"{ext[1]:.3f}",
                             f"{cand.similarity:.4f}", f"{dist:.2f}"])
    world, search = first
    boxes, labels = [], []
    for cand in search.candidates[:5]:
        cl = next(c for c in search.clusters if c.id == cand.cluster_id)
        lo, hi = cl.points[:, :2].min(axis=0), cl.points[:, :2].max(axis=0)
        boxes.append(np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]))
        labels.append(f"{cand.similarity:.2f}")
    fig = reports.figure_scan(world, boxes, labels, ctx.out / "find_panel.png")
    body = reports.table(["rep", "waypoint", "rank", "points", "extent 1 (m)", "extent 2 (m)", "similarity",
                          "to panel (m)"], rows, title="top candidates per scan")
    return Result(body, times, "Panel search", [fig])


def _docking_waypoint(sc: Scenario, seed: int):
    best = None
    for i, wp in enumerate(sc.waypoints):
        _, search = _panel_scan(sc, wp, derive_seed(seed, "wp", i), 16.0)
        if search.best is not None and (best is None or search.best.similarity > best[1]):
            best = (wp, search.best.similarity)
    if best is None:
        raise InsufficientDataError("no panel candidate from any waypoint")
    return best[0]


def cmd_dock(ctx: Context) -> Result:
    sc = ctx.need_scenario()
    m = sc.mission
    start = _docking_waypoint(sc, ctx.seed)
    rows, d, o, a, times, last = [], [], [], [], [], None
    for r in range(ctx.reps):
        seed = ctx.rep_seed(r)
        run, dt = _timed(simulate_docking, sc.arena, start, sc.laser, derive_seed(seed, "dock"), m.dock_distance,
                         m.dock_noise, m.dock_heading_noise)
        times.append(dt)
        if run is None:
            raise PanelbotError("docking lost the panel")
        est = run.estimate
        alpha = (est.alpha + 90.0) % 180.0 - 90.0
        d.append(abs(est.d))
        o.append(est.o)
        a.append(alpha)
        rows.append([str(r), f"{est.d:.4f}", f"{est.o:.4f}", f"{alpha:.3f}", f"{run.alpha_measured:.3f}"])
        last = run
    world = to_world(merged_base_points(sc.arena, last.final_pose, sc.laser, 0), last.final_pose)
    x, y, th = last.final_pose
    t = np.radians(th)
    robot = np.array([[x + 0.4 * np.cos(t) - 0.3 * np.sin(t) * s2, y + 0.4 * np.sin(t) + 0.3 * np.cos(t) * s2]
                      for s2 in (1, -1)] + [[x - 0.4 * np.cos(t) - 0.3 * np.sin(t) * s2,
                                             y - 0.4 * np.sin(t) + 0.3 * np.cos(t) * s2] for s2 in (-1, 1)])
    fig = reports.figure_scan(world, [robot, sc.arena.panel.corners()], ["robot", "panel"], ctx.out / "dock.png")
    body = (reports.docking_table(d, o, a, (m.dock_distance, 0.0, 0.0)) + "\n"
            + reports.table(["rep", "d (m)", "o (m)", "alpha (deg)", "alpha measured (deg)"], rows))
    return Result(body, times, "Docking", [fig])


def _detect_image(ctx: Context, kind: str, r: int):
    """(image, truth boxes or None, min size, max size)."""
    path = ctx.params.get("image")
    if path:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"image {p} not found")
        if p not in ctx.inputs:
            ctx.inputs.append(p)
        return read_pgm(p), None, None, None
    sc = ctx.need_scenario()
    m = sc.mission
    seed = derive_seed(ctx.rep_seed(r), "image")
    if kind == "wrench":
        cam = sc.inspection_camera()
        img = render_panel_image(sc.scene, cam, seed, m.image_noise, m.image_gradient, sc.scene.side)
        truth = [wrench_truth(sc.scene, i, cam).box for i in range(6)]
        lo, hi = head_window_range(cam.fx, m.camera_distance + sc.scene.standoff / 1000.0)
    else:
        cam = sc.valve_rig().left
        img = render_panel_image(sc.scene, cam, seed, m.image_noise, m.image_gradient, sc.scene.side)
        truth = [valve_box(sc.scene, cam)]
        lo, hi = truth[0][2] / 1.35, truth[0][2] * 1.35
    return img, truth, lo, hi


def cmd_detect(ctx: Context) -> Result:
    kind = _kind(ctx)
    cas = _cascade(ctx, kind)
    rows, times, first = [], [], None
    for r in range(ctx.reps):
        img, truth, lo, hi = _detect_image(ctx, kind, r)
        dets, dt = _timed(detect, img, cas, min_neighbors=int(ctx.params["min_neighbors"]), min_size=lo, max_size=hi)
        times.append(dt)
        if first is None:
            first = (img, dets)
        for k, det in enumerate(dets):
            best = max((iou(det.bbox, b) for b in truth), default=float("nan")) if truth else float("nan")
            x, y, w, h = det.bbox
            rows.append([str(r), str(k), f"{x:.1f}", f"{y:.1f}", f"{w:.1f}", f"{h:.1f}", str(det.neighbors),
                         f"{det.score:.3f}", "-" if truth is None else f"{best:.3f}"])
    img, dets = first
    pgm = ctx.out / "detect_input.pgm"
    write_pgm(pgm, img)
    fig = reports.figure_image(img, [d.bbox for d in dets], ctx.out / "detect.png")
    body = reports.table(["rep", "det", "x", "y", "w", "h", "neighbors", "score", "best IoU"], rows,
                         title=f"{kind} detections")
    return Result(body, times, f"{kind.capitalize()} detection", [pgm, fig], failure=None if rows else "no-detections")


def _wrench_run(sc: Scenario, seed: int, cascade: Cascade, frames: int):
    m = sc.mission
    cam = sc.inspection_camera()
    clean = render_clean(sc.scene, cam, sc.scene.side)
    first = apply_lighting(clean, derive_seed(seed, "frame", 0), m.image_noise, m.image_gradient)
    lo, hi = head_window_range(cam.fx, m.camera_distance + sc.scene.standoff / 1000.0)
    heads = find_heads(first, cascade, lo, hi)
    if not heads:
        raise PanelbotError("no wrench heads detected")
    obs = [[] for _ in heads]
    cloud = None
    for f in range(frames):
        img = first if f == 0 else apply_lighting(clean, derive_seed(seed, "frame", f), m.image_noise,
                                                  m.image_gradient)
        cloud = np.vstack([synthesize_handle_cloud(sc.scene, cam, m.cloud_noise, m.cloud_outliers,
                                                   derive_seed(seed, "cloud", f, i), index=i) for i in range(6)])
        for k, (box, _) in enumerate(heads):
            try:
                obs[k].append(observe_wrench(img, box, cloud, cam, seed=derive_seed(seed, "ransac", f, k)))
            except PanelbotError:
                pass
    est = [accumulate_median(o, frames) if len(o) >= frames else None for o in obs]
    return cam, first, cloud, heads, est


def cmd_wrench_pose(ctx: Context) -> Result:
    sc = ctx.need_scenario()
    cas = _cascade(ctx, "wrench")
    frames = int(ctx.params["frames"])
    rows, times, first, picks = [], [], None, []
    for r in range(ctx.reps):
        (cam, img, cloud, heads, est), dt = _timed(_wrench_run, sc, ctx.rep_seed(r), cas, frames)
        times.append(dt)
        if first is None:
            first = (img, cloud, heads, est)
        widths = [e.width_mm if e is not None else float("nan") for e in est]
        try:
            best, backup = select_target(widths, sc.mission.target_width, sc.mission.width_tolerance)
            picks.append([str(r), str(best), "-" if backup is None else str(backup)])
        except PanelbotError as exc:
            picks.append([str(r), exc.label, "-"])
        for k, ((box, _), e) in enumerate(zip(heads, est)):
            cx, cy = box[0] + box[2] / 2, box[1] + box[3] / 2
            wid = int(np.argmin([np.hypot(*(wrench_truth(sc.scene, i, cam).center_px - (cx, cy)))
                                 for i in range(6)]))
            tr = wrench_truth(sc.scene, wid, cam)
            if e is None:
                rows.append([str(r), str(k), str(wid), "incomplete-window"] + ["-"] * 5)
                continue
            hb = extend_handle_bbox(tr.box, img.shape).box
            g_err = np.linalg.norm(e.grasp_point - grasp_truth(sc.scene, wid, cam, hb)) * 1000
            o_err = angular_difference(e.orientation_deg, tr.orientation)
            rows.append([str(r), str(k), str(wid), f"{e.width_mm:.2f}", f"{sc.scene.wrenches[wid].head_width:g}",
                         f"{e.orientation_deg:.2f}", f"{o_err:.2f}",
                         " ".join(f"{v:.4f}" for v in e.grasp_point), f"{g_err:.2f}"])
    img, cloud, heads, est = first
    pgm, xyz = ctx.out / "wrench_frame.pgm", ctx.out / "wrench_cloud.xyz"
    write_pgm(pgm, img)
    write_xyz(xyz, cloud)
    arrows = [((box[0] + jaw.grip_center[0], box[1] + jaw.grip_center[1]),
               float(np.degrees(np.arctan2(*(jaw.grip_center - jaw.deep_point)[::-1])))) for box, jaw in heads]
    fig = reports.figure_image(img, [h[0] for h in heads], ctx.out / "wrench_pose.png", arrows=arrows)
    body = (reports.table(["rep", "head", "wrench", "width (mm)", "true (mm)", "orientation (deg)", "err (deg)",
                           "grasp point (m)", "grasp err (mm)"], rows, title=f"accumulated over {frames} frames")
            + "\n" + reports.table(["rep", "target head", "backup head"], picks))
    return Result(body, times, "Wrench detection", [pgm, xyz, fig])


def _valve_angles(text) -> list:
    try:
        return [float(a) for a in str(text).split(",") if a.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"angles must be comma separated numbers: {text!r}") from exc


def cmd_valve_pose(ctx: Context) -> Result:
    from dataclasses import replace
    sc = ctx.need_scenario()
    cas = _cascade(ctx, "valve")
    m = sc.mission
    angles = _valve_angles(ctx.params["angles"])
    if not angles:
        raise UsageError("no angles given")
    per_angle, fails, times, rows = {}, {}, [], []
    for angle in angles:
        scene = replace(sc.scene, valve=replace(sc.scene.valve, angle=angle))
        rig = sc.valve_rig()
        cleans = [render_clean(scene, cam, scene.side) for cam in (rig.left, rig.right)]
        est_list, n_fail = [], 0
        for r in range(ctx.reps):
            seed = ctx.rep_seed(r)
            views = [apply_lighting(c, derive_seed(seed, "valve", angle, j), m.image_noise, m.image_gradient)
                     for j, c in enumerate(cleans)]
            t0 = time.perf_counter()
            try:
                est = estimate_valve(views[0], views[1], rig, cas, scene.valve.edge / 1000.0, m.valve_camera_distance,
                                     seed=derive_seed(seed, "hough"))
            except PanelbotError as exc:
                times.append(time.perf_counter() - t0)
                n_fail += 1
                rows.append([f"{angle:g}", str(r), exc.label, "-", "-"])
                continue
            times.append(time.perf_counter() - t0)
            # report the estimate on the branch nearest the commanded angle
            val = angle + ((est.stem_angle_deg - angle + 45.0) % 90.0 - 45.0)
            est_list.append(val)
            err = np.linalg.norm(est.center_3d - valve_truth(scene, rig.left)["center_world"]) * 1000
            rows.append([f"{angle:g}", str(r), f"{val:.3f}", str(est.used_segments), f"{err:.2f}"])
        per_angle[angle] = est_list
        fails[angle] = n_fail
    ok = {a: v for a, v in per_angle.items() if v}
    body = reports.valve_angle_table(ok) if ok else "no valve estimate succeeded\n"
    body += "\n" + reports.table(["alpha (deg)", "failures"], [[f"{a:g}", str(fails[a])] for a in angles])
    body += "\n" + reports.table(["alpha (deg)", "rep", "estimate (deg)", "segments", "centre err (mm)"], rows)
    fig = reports.figure_bars([f"{a:g}" for a in ok], [float(np.mean(v)) for v in ok.values()],
                              "estimated angle (deg)", ctx.out / "valve_pose.png",
                              errors=[float(np.std(v)) for v in ok.values()]) if ok else None
    return Result(body, times, "Valve detection", [fig] if fig else [], failure=None if ok else "valve-not-found")


def cmd_train(ctx: Context) -> Result:
    kind = _kind(ctx)
    p = ctx.params
    times, logs, artifacts = [], [], []
    for r in range(ctx.reps):
        seed = ctx.rep_seed(r)
        lines = []

        def job():
            data = build_dataset(kind, int(p["positives"]), int(p["negatives"]), seed=seed,
                                 n_neg_images=int(p["negative_images"]))
            return train_cascade(data, stages=int(p["stages"]), seed=seed, mine_stride=int(p["mine_stride"]),
                                 log=lines.append)

        cas, dt = _timed(job)
        times.append(dt)
        path = ctx.out / (f"{kind}_cascade.json" if r == 0 else f"{kind}_cascade_{r}.json")
        cas.save(path)
        artifacts.append(path)
        logs.append(f"rep {r} seed {seed}: {len(cas.stages)} stages\n" + "\n".join(lines) + "\n")
    return Result("\n".join(logs), times, f"{kind.capitalize()} training", artifacts)


def cmd_evaluate(ctx: Context) -> Result:
    kind = _kind(ctx)
    p = ctx.params
    times, table_rows, per_rep, f2 = [], {}, [], []
    for r in range(ctx.reps):
        seed = ctx.rep_seed(r)

        def job():
            data = build_dataset(kind, int(p["positives"]), int(p["negatives"]), seed=seed,
                                 n_neg_images=int(p["negative_images"]))
            if p.get("cascade"):
                cas, test = _cascade(ctx, kind), data
            else:
                train, test = data.split(float(p["train_fraction"]), seed)
                cas = train_cascade(train, stages=int(p["stages"]), seed=seed, mine_stride=int(p["mine_stride"]))
            windows = list(test.positives) + list(test.negatives)
            labels = [True] * len(test.positives) + [False] * len(test.negatives)
            return evaluate(cas.classify_windows(windows), labels)

        rep, dt = _timed(job)
        times.append(dt)
        table_rows[f"{kind} seed {seed}"] = rep
        per_rep.append([str(r), str(rep.tp), str(rep.tn), str(rep.fp), str(rep.fn)])
        f2.append(rep.f2)
    body = (reports.classifier_table(table_rows) + "\n"
            + reports.table(["rep", "TP", "TN", "FP", "FN"], per_rep) + "\n"
            + f"mean F2 {np.mean(f2):.4f}  min F2 {min(f2):.4f}\n")
    fig = reports.figure_bars([str(i) for i in range(len(f2))], f2, "F2", ctx.out / "evaluate.png")
    return Result(body, times, "Classifier evaluation", [fig])


def cmd_run_mission(ctx: Context) -> Result:
    times, texts, reports_ = [], [], []
    for r in range(ctx.reps):
        seed = ctx.rep_seed(r)
        sc = ctx.scenario
        if sc is None:
            sc = generate_scenario(seed)
            if ctx.params.get("_scenario_overrides"):
                sc = with_overrides(sc, ctx.params["_scenario_overrides"])
        rep, dt = _timed(run_mission, sc, seed)
        times.append(dt)
        reports_.append(rep)
        texts.append(rep.to_text())
    counts = category_counts(reports_)
    scored = sum(r.scored for r in reports_)
    body = ("\n".join(texts) + "\n" + reports.category_table(counts, len(reports_))
            + f"\nscored {scored} of {len(reports_)}\n")
    fig = reports.figure_trace([s.value for s in reports_[0].states()], ctx.out / "run_mission.png")
    done = any(r.final_state.value == "Done" for r in reports_)
    return Result(body, times, "Mission", [fig], failure=None if done else "mission-failed")


@dataclass(frozen=True)
class Command:
    fn: Callable
    defaults: dict
    help: str


COMMANDS = {
    "gen-scenario": Command(cmd_gen_scenario, {"side": "near", "target_width": 24.0, "n_distractors": None},
                            "write a random scenario document"),
    "find-panel": Command(cmd_find_panel, {"waypoint": -1, "max_range": 16.0},
                          "scan from the patrol waypoints and rank panel candidates"),
    "dock": Command(cmd_dock, {}, "approach and dock beside the panel"),
    "detect": Command(cmd_detect, {"kind": "wrench", "cascade": None, "image": None, "min_neighbors": 3},
                      "run a cascade over one image"),
    "wrench-pose": Command(cmd_wrench_pose, {"cascade": None, "frames": 10},
                           "grip centre, orientation, width and grasp point of every head"),
    "valve-pose": Command(cmd_valve_pose, {"cascade": None, "angles": "0,15,30,45"},
                          "stem angle and centre from stereo renders, per commanded angle"),
    "train": Command(cmd_train, {"kind": "wrench", "positives": 400, "negatives": 1500, "negative_images": 40,
                                 "stages": 10, "mine_stride": 4}, "train a cascade on synthetic renders"),
    "evaluate": Command(cmd_evaluate, {"kind": "wrench", "cascade": None, "positives": 300, "negatives": 1000,
                                       "negative_images": 40, "train_fraction": 0.7, "stages": 10,
                                       "mine_stride": 4}, "window-level accuracy, precision, recall and F2"),
    "run-mission": Command(cmd_run_mission, {}, "full closed-loop mission"),
}


def _parse_seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v <= U64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _parse_reps(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError("--reps must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, help="scenario YAML")
    common.add_argument("--seed", type=_parse_seed, required=True, help="64-bit unsigned seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--reps", type=_parse_reps, default=1, help="repetitions (seed, seed+1, ...)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="parameter override; mission.* and laser.* go to the scenario")
    parser = argparse.ArgumentParser(prog="panelbot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, cmd in COMMANDS.items():
        keys = ", ".join(f"{k}={v}" for k, v in cmd.defaults.items()) or "none"
        sub.add_parser(name, parents=[common], help=cmd.help, description=f"{cmd.help}. Parameters: {keys}.")
    return parser


def _overrides(items, defaults: dict) -> tuple[dict, dict]:
    params, scen = dict(defaults), {}
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            value = yaml.safe_load(raw) if raw.strip() else None
        except yaml.YAMLError:
            value = raw
        if key.startswith(("mission.", "laser.")):
            scen[key] = value
        elif key in defaults:
            params[key] = raw if key in ("angles", "image", "cascade", "kind", "side") else value
        else:
            raise UsageError(f"unknown parameter {key!r}; known: {', '.join(defaults) or 'none'}")
    return params, scen


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    cmd = COMMANDS[args.command]
    try:
        params, scen_over = _overrides(args.overrides, cmd.defaults)
        scenario = None
        inputs = []
        if args.scenario is not None:
            if not args.scenario.is_file():
                raise UsageError(f"scenario {args.scenario} not found")
            scenario = load_scenario(args.scenario)
            inputs.append(args.scenario)
            if scen_over:
                scenario = with_overrides(scenario, scen_over)
        elif scen_over:
            params["_scenario_overrides"] = scen_over
        args.out.mkdir(parents=True, exist_ok=True)
        ctx = Context(args.command, args.seed, args.reps, args.out, params, scenario, inputs)
        result = cmd.fn(ctx)
    except (UsageError, ConfigError) as exc:
        label = getattr(exc, "label", "usage-error")
        print(f"panelbot {args.command}: {label}: {exc}", file=sys.stderr)
        return 2
    except PanelbotError as exc:
        print(f"panelbot {args.command}: {exc.label}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"panelbot {args.command}: io-error: {exc}", file=sys.stderr)
        return 2

    name = args.command.replace("-", "_")
    report = reports.write_text(args.out / f"{name}.txt", result.body)
    timing = reports.timing_table(result.timing_label, result.timings)
    reports.write_text(args.out / f"{name}_timing.txt", timing)
    shown = {k: v for k, v in sorted(params.items()) if not k.startswith("_")}
    shown.update({k: v for k, v in sorted(scen_over.items())})
    reports.write_manifest(args.out, args.command, args.seed, args.reps, shown, ctx.inputs,
                           [report] + [a for a in result.artifacts if a is not None])
    sys.stdout.write(result.body)
    sys.stdout.write("\n" + timing)
    if result.failure:
        print(f"panelbot {args.command}: {result.failure}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
