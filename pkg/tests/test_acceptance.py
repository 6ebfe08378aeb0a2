"""Acceptance criteria 1-11, each at its stated tolerance and budget.

Every test records a one-line verdict through the ``criterion`` fixture;
the lines are printed together at the end of the pytest run.
"""
import math
import time
from collections import deque
from dataclasses import replace

import numpy as np
import pytest

from panelbot import cli, reports
from panelbot.cascade_detector import bundled_cascade, evaluate, train_cascade
from panelbot.datasets import build_dataset
from panelbot.errors import PanelbotError
from panelbot.geometry import (PinholeCamera, Plane, RigidTransform, StereoRig, angular_difference,
                               mean_and_covariance, obb_of_cluster, principal_components, ray_plane_intersection,
                               triangulate)
from panelbot.mission import TRANSITIONS, MissionEvent, MissionState, category_counts, run_mission, step
from panelbot.panel_finder import docking_report, estimate_docking_angle, find_panel, merged_base_points, to_world
from panelbot.scenario import generate_scenario
from panelbot.scene_sim import (ArenaSpec, LaserSpec, PanelPlacement, apply_lighting, grasp_truth, render_clean,
                                render_panel_image, synthesize_handle_cloud, wrench_truth)
from panelbot.seeds import derive_seed
from panelbot.valve_pipeline import estimate_valve
from panelbot.wrench_pipeline import (WrenchObservation, accumulate_median, extend_handle_bbox, find_heads,
                                      head_window_range, observe_wrench)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# --- 1 ---------------------------------------------------------------------


def test_criterion_01_geometry_oracles(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = dict(obb=0.0, eig=0.0, ray=0.0, tri=0.0)
    for _ in range(100):
        pts = rng.normal(size=(int(rng.integers(20, 200)), 3)) * rng.uniform(0.05, 3.0, 3)
        rot, shift = random_rotation(rng), rng.uniform(-50, 50, 3)
        a = np.array(obb_of_cluster(pts)[1].sorted_desc())
        b = np.array(obb_of_cluster(pts @ rot.T + shift)[1].sorted_desc())
        worst["obb"] = max(worst["obb"], float(np.abs(a - b).max()))

        _, cov = mean_and_covariance(pts @ random_rotation(rng).T)
        recon = sum(val * np.outer(vec, vec) for val, vec in principal_components(cov))
        worst["eig"] = max(worst["eig"], float(np.abs(recon - cov).max()))

        cam = PinholeCamera(*rng.uniform(500, 1500, 2), *rng.uniform(200, 600, 2))
        p = np.array([*rng.uniform(-1, 1, 2), rng.uniform(0.5, 5.0)])
        normal = rng.normal(size=3)
        normal[2] = abs(normal[2]) + 0.2
        plane = Plane.from_point_normal(p, normal)
        hit = ray_plane_intersection(cam.project_camera(p)[0], cam, plane)
        worst["ray"] = max(worst["ray"], abs(float(plane.signed_distance(hit[None, :])[0])))

        left = PinholeCamera(1000.0, 1000.0, 480.0, 360.0, RigidTransform(random_rotation(rng), rng.uniform(-2, 2, 3)))
        rig = StereoRig.rectified(left, float(rng.uniform(0.05, 0.3)))
        x = left.pose.apply(np.array([[*rng.uniform(-0.5, 0.5, 2), rng.uniform(0.3, 4.0)]]))[0]
        est = triangulate(rig.left.project(x)[0], rig.right.project(x)[0], rig)
        worst["tri"] = max(worst["tri"], float(np.linalg.norm(est - x)))
    dt = time.perf_counter() - t0
    ok = worst["obb"] <= 1e-6 and worst["eig"] <= 1e-7 and worst["ray"] <= 1e-9 and worst["tri"] <= 1e-6 and dt < 5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f"; {dt:.2f} s"
    assert criterion(ok, detail), detail


# --- 2 ---------------------------------------------------------------------


def test_criterion_02_panel_ranking(criterion):
    t0 = time.perf_counter()
    firsts, distractors = 0, []
    for seed in range(100):
        sc = generate_scenario(seed)
        pan = sc.arena.panel
        distractors.append(len(sc.arena.distractors))
        wp = min(sc.waypoints, key=lambda w: math.hypot(w[0] - pan.x, w[1] - pan.y))
        laser = replace(sc.laser, range_noise_sigma=0.01)
        world = to_world(merged_base_points(sc.arena, wp, laser, seed), wp)
        search = find_panel(world, origin=wp[:2], seed=seed)
        if search.best is None:
            continue
        cl = next(c for c in search.clusters if c.id == search.best.cluster_id)
        firsts += bool(np.hypot(*(cl.points[:, :2].mean(axis=0) - (pan.x, pan.y))) < 1.0)
    dt = time.perf_counter() - t0
    ok = firsts >= 95 and dt < 30 and min(distractors) >= 3
    detail = f"true panel first in {firsts}/100 arenas, {min(distractors)}-{max(distractors)} distractors; {dt:.1f} s"
    assert criterion(ok, detail), detail


# --- 3 ---------------------------------------------------------------------


def test_criterion_03_docking_angle(criterion):
    panel = PanelPlacement(0.0, 0.0, 0.0, 1.8, 0.3)
    arena = ArenaSpec((-20.0, -20.0, 20.0, 20.0), panel)
    laser = LaserSpec(range_noise_sigma=0.01)
    means = {}
    for alpha in (0, 15, 30, 45, 150):
        # panel centre straight off the robot's right side, 0.95 m away
        h = math.radians(-alpha)
        pose = (-0.95 * math.sin(h), 0.95 * math.cos(h), -float(alpha))
        truth = docking_report(pose, panel).alpha
        errs = [angular_difference(estimate_docking_angle(merged_base_points(arena, pose, laser, s), seed=s), truth, 180)
                for s in range(20)]
        means[alpha] = float(np.mean(errs))
    ok = max(means.values()) <= 1.0
    detail = "mean |err| " + ", ".join(f"{a}: {e:.3f}" for a, e in means.items()) + " deg"
    assert criterion(ok, detail), detail


# --- 4 ---------------------------------------------------------------------


def test_criterion_04_valve_orientation(criterion):
    cascade = bundled_cascade("valve")
    sc = generate_scenario(4)
    m = sc.mission
    rig = sc.valve_rig()
    t0 = time.perf_counter()
    per_angle, failures = {}, 0
    for angle in (0.0, 15.0, 30.0, 45.0):
        scene = replace(sc.scene, valve=replace(sc.scene.valve, angle=angle))
        cleans = [render_clean(scene, cam, scene.side) for cam in (rig.left, rig.right)]
        est = []
        for r in range(50):
            views = [apply_lighting(c, derive_seed(r, "valve", angle, j), m.image_noise, m.image_gradient)
                     for j, c in enumerate(cleans)]
            try:
                v = estimate_valve(views[0], views[1], rig, cascade, scene.valve.edge / 1000, m.valve_camera_distance,
                                   seed=r)
            except PanelbotError:
                failures += 1
                continue
            est.append(angle + ((v.stem_angle_deg - angle + 45.0) % 90.0 - 45.0))
        per_angle[angle] = est
    dt = time.perf_counter() - t0
    errs = {a: float(np.mean(np.abs(np.array(v) - a))) for a, v in per_angle.items() if v}
    table = reports.valve_angle_table({a: v for a, v in per_angle.items() if v})
    ok = failures == 0 and len(errs) == 4 and max(errs.values()) <= 2.0 and dt < 120
    detail = f"max per-angle mean error {max(errs.values()):.2f} deg, {failures} failures; {dt:.1f} s"
    assert criterion(ok, detail, table), detail


# --- 5 ---------------------------------------------------------------------


def test_criterion_05_classifier(criterion):
    scores, slowest = [], 0.0
    for seed in range(5):
        t0 = time.perf_counter()
        data = build_dataset("wrench", 300, 1000, seed=seed, n_neg_images=40)
        train, test = data.split(0.7, seed)
        cascade = train_cascade(train, stages=10, seed=seed, mine_stride=4)
        slowest = max(slowest, time.perf_counter() - t0)
        windows = list(test.positives) + list(test.negatives)
        labels = [True] * len(test.positives) + [False] * len(test.negatives)
        scores.append(evaluate(cascade.classify_windows(windows), labels).f2)
    ok = min(scores) >= 0.90 and slowest < 600
    detail = "F2 " + ", ".join(f"{s:.3f}" for s in scores) + f"; slowest training {slowest:.0f} s"
    assert criterion(ok, detail), detail


# --- 6 ---------------------------------------------------------------------


def test_criterion_06_metric_arithmetic(criterion):
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(1000):
        counts = rng.integers(0, 40, 4) * (rng.random(4) > 0.15)
        if counts.sum() == 0:
            counts[0] = 1
        labels = [True] * int(counts[0] + counts[3]) + [False] * int(counts[1] + counts[2])
        preds = [True] * int(counts[0]) + [False] * int(counts[3]) + [False] * int(counts[1]) + [True] * int(counts[2])
        order = rng.permutation(len(labels))
        labels = [labels[i] for i in order]
        preds = [preds[i] for i in order]
        tp = tn = fp = fn = 0
        for p, y in zip(preds, labels):
            if p and y:
                tp += 1
            elif not p and not y:
                tn += 1
            elif p:
                fp += 1
            else:
                fn += 1
        acc = (tp + tn) / (tp + tn + fp + fn)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f2 = 5 * prec * rec / (4 * prec + rec) if 4 * prec + rec else 0.0
        got = evaluate(preds, labels)
        bad += (got.tp, got.tn, got.fp, got.fn, got.accuracy, got.precision, got.recall, got.f2) != (
            tp, tn, fp, fn, acc, prec, rec, f2)
    assert criterion(bad == 0, f"{1000 - bad}/1000 tables exact"), bad


# --- 7 ---------------------------------------------------------------------


def test_criterion_07_wrench_pipeline(criterion):
    cascade = bundled_cascade("wrench")
    worst_g = worst_o = worst_p = 0.0
    missing = 0
    for seed in range(20):
        sc = generate_scenario(seed)
        scene, m = sc.scene, sc.mission
        cam = sc.inspection_camera()
        image = render_panel_image(scene, cam, None, visible_side=scene.side)
        cloud = np.vstack([synthesize_handle_cloud(scene, cam, 0.0, m.cloud_outliers, seed * 10 + i, index=i)
                           for i in range(6)])
        lo, hi = head_window_range(cam.fx, m.camera_distance + scene.standoff / 1000)
        heads = find_heads(image, cascade, lo, hi)
        truths = [wrench_truth(scene, i, cam) for i in range(6)]
        matched = set()
        for box, _ in heads:
            centre = np.array([box[0] + box[2] / 2, box[1] + box[3] / 2])
            i = int(np.argmin([np.linalg.norm(t.center_px - centre) for t in truths]))
            matched.add(i)
            obs = observe_wrench(image, box, cloud, cam, seed=seed)
            hb = extend_handle_bbox(truths[i].box, image.shape).box
            worst_g = max(worst_g, 1000 * float(np.linalg.norm(obs.grasp_point - grasp_truth(scene, i, cam, hb))))
            worst_o = max(worst_o, angular_difference(obs.orientation_deg, truths[i].orientation))
            worst_p = max(worst_p, abs(float(obs.handle_plane.signed_distance(obs.grip_center_3d[None, :])[0])))
        missing += 6 - len(matched)
    ok = missing == 0 and worst_g <= 5.0 and worst_o <= 2.0 and worst_p <= 1e-6
    detail = (f"grasp {worst_g:.2f} mm, orientation {worst_o:.2f} deg, plane {worst_p:.1e} m, "
              f"{missing} heads missed over 20 scenes")
    assert criterion(ok, detail), detail


# --- 8 ---------------------------------------------------------------------


def _observation(rng, grip, grasp, angle, width):
    return WrenchObservation((0, 0, 10, 10), (0, -20, 10, 20), np.zeros(2), np.asarray(grip, float), float(angle),
                             np.asarray(grasp, float), Plane(0.0, 0.0, 1.0, -1.0), float(width))


def test_criterion_08_median_robustness(criterion):
    rng = np.random.default_rng(8)
    violations = 0
    for _ in range(200):
        grip0, grasp0 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        ang0, w0 = rng.uniform(-180, 180), rng.uniform(16, 32)
        clean = [(grip0 + rng.normal(0, 0.002, 3), grasp0 + rng.normal(0, 0.002, 3),
                  ang0 + rng.normal(0, 3.0), w0 + rng.normal(0, 0.5)) for _ in range(10)]
        frames = list(clean)
        bad = rng.choice(10, size=int(rng.integers(0, 5)), replace=False)
        for k in bad:
            frames[k] = (rng.uniform(-5, 5, 3), rng.uniform(-5, 5, 3), rng.uniform(-180, 180), rng.uniform(0, 100))
        good = [clean[k] for k in range(10) if k not in set(bad)]
        est = accumulate_median([_observation(rng, *f) for f in frames])
        for field_est, idx in ((est.grip_center_3d, 0), (est.grasp_point, 1)):
            vals = np.array([g[idx] for g in good])
            violations += bool(np.any(field_est < vals.min(axis=0) - 1e-12) or np.any(field_est > vals.max(axis=0) + 1e-12))
        rel = np.array([(g[2] - ang0 + 180) % 360 - 180 for g in good])
        e = (est.orientation_deg - ang0 + 180) % 360 - 180
        violations += bool(e < rel.min() - 1e-9 or e > rel.max() + 1e-9)
        widths = [g[3] for g in good]
        violations += bool(est.width_mm < min(widths) or est.width_mm > max(widths))
    assert criterion(violations == 0, f"{violations} field violations over 200 trials"), violations


# --- 9, 10 -----------------------------------------------------------------


@pytest.fixture(scope="module")
def missions():
    t0 = time.perf_counter()
    out = [run_mission(generate_scenario(seed), seed) for seed in range(100)]
    return out, time.perf_counter() - t0


def test_criterion_09_fsm(criterion, missions):
    reps, _ = missions
    t0 = time.perf_counter()
    total = all((s, e) in TRANSITIONS for s in MissionState for e in MissionEvent)
    emergency = all(step(s, MissionEvent.Emergency) is MissionState.EmergencyStop for s in MissionState)
    seen, queue = {MissionState.NavigatePatrol}, deque([MissionState.NavigatePatrol])
    while queue:
        s = queue.popleft()
        for e in MissionEvent:
            n = TRANSITIONS[(s, e)]
            if n not in seen:
                seen.add(n)
                queue.append(n)
    reachable = seen == set(MissionState)
    replay_bad = 0
    for rep in reps:
        state = MissionState.NavigatePatrol
        for row in rep.rows:
            if row.state is not state or step(row.state, row.event) is not row.next_state:
                replay_bad += 1
                break
            state = row.next_state
    dt = time.perf_counter() - t0
    ok = total and emergency and reachable and replay_bad == 0 and dt < 10
    detail = (f"total {total}, emergency {emergency}, reachable {len(seen)}/{len(MissionState)}, "
              f"{100 - replay_bad}/100 traces replay; {dt:.2f} s")
    assert criterion(ok, detail), detail


def test_criterion_10_mission_success(criterion, missions):
    reps, dt = missions
    counts = category_counts(reps)
    scored = sum(r.scored for r in reps)
    ok = scored >= 85 and dt < 300
    detail = f"{scored}/100 scored, counts {counts}; {dt:.0f} s"
    assert criterion(ok, detail, reports.category_table(counts, len(reps))), detail


# --- 11 --------------------------------------------------------------------


DETERMINISM_RUNS = [
    ["gen-scenario"],
    ["find-panel", "@scenario"],
    ["dock", "@scenario"],
    ["detect", "@scenario"],
    ["detect", "@scenario", "--set", "kind=valve"],
    ["wrench-pose", "@scenario", "--set", "frames=3"],
    ["valve-pose", "@scenario", "--set", "angles=0,30"],
    ["train", "--set", "positives=40", "--set", "negatives=120", "--set", "negative_images=2", "--set", "stages=2"],
    ["evaluate", "--set", "positives=40", "--set", "negatives=120", "--set", "negative_images=2", "--set", "stages=2"],
    ["run-mission", "@scenario"],
]


def test_criterion_11_determinism(criterion, tmp_path, capsys):
    scen_dir = tmp_path / "scenario"
    assert cli.run(["gen-scenario", "--seed", "11", "--out", str(scen_dir)]) == 0
    scenario = scen_dir / "scenario.yaml"
    differing = []
    for argv in DETERMINISM_RUNS:
        argv = [a for a in argv if a != "@scenario"] + (["--scenario", str(scenario)] if "@scenario" in argv else [])
        bodies = []
        for run in ("a", "b"):
            out = tmp_path / f"{argv[0]}_{len(bodies)}_{run}"
            code = cli.run(argv + ["--seed", "3", "--out", str(out)])
            name = argv[0].replace("-", "_")
            bodies.append((code, (out / f"{name}.txt").read_bytes(), (out / "manifest.json").read_bytes()))
        capsys.readouterr()
        if bodies[0] != bodies[1] or bodies[0][0] != 0:
            differing.append(" ".join(argv))
    ok = not differing
    detail = f"{len(DETERMINISM_RUNS) - len(differing)}/{len(DETERMINISM_RUNS)} commands byte-identical on rerun"
    if differing:
        detail += "; differ: " + "; ".join(differing)
    assert criterion(ok, detail), detail
