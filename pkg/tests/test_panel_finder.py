import math

import numpy as np
import pytest

from panelbot.errors import ContractViolation
from panelbot.geometry import ObbExtent
from panelbot.panel_finder import (docking_report, estimate_docking_angle, euclidean_cluster, find_panel,
                                   merged_base_points, rank_candidates, similarity, simulate_docking, to_world)
from panelbot.scene_sim import ArenaSpec, Distractor, LaserSpec, PanelPlacement


def brute_components(pts, tol):
    parent = list(range(len(pts)))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.linalg.norm(pts[i] - pts[j]) <= tol:
                parent[root(i)] = root(j)
    groups = {}
    for i in range(len(pts)):
        groups.setdefault(root(i), []).append(i)
    return sorted(sorted(g) for g in groups.values())


def test_clustering_matches_union_find():
    rng = np.random.default_rng(0)
    for _ in range(10):
        pts = np.column_stack([rng.uniform(0, 5, (150, 2)), np.zeros(150)])
        got = euclidean_cluster(pts, tolerance=0.3, min_size=1)
        index = {tuple(p): i for i, p in enumerate(pts)}
        mine = sorted(sorted(index[tuple(p)] for p in c.points) for c in got)
        assert mine == brute_components(pts, 0.3)


def test_clustering_drops_small_clusters_and_bad_tolerance():
    pts = np.array([[0, 0, 0], [0.1, 0, 0], [5, 5, 0]], float)
    assert [len(c) for c in euclidean_cluster(pts, 0.3, min_size=2)] == [2]
    assert euclidean_cluster(np.zeros((0, 3))) == []
    with pytest.raises(ContractViolation):
        euclidean_cluster(pts, tolerance=0.0)


def test_similarity_formula():
    assert similarity(ObbExtent(1.8, 0.3, 0.0), (1.8, 0.3)) == pytest.approx(1.0)
    assert similarity(ObbExtent(0.3, 1.0, 0.0), (1.8, 0.3)) == pytest.approx(math.exp(-0.8 / 1.8))


def test_rank_candidates_orders_by_similarity():
    t = np.linspace(0, 1.8, 40)
    panel = np.column_stack([t, 0.01 * np.sin(t * 40), np.zeros_like(t)])
    stub = panel[:10] + [5, 5, 0]
    clusters = euclidean_cluster(np.vstack([stub, panel]), 0.3, 3)
    ranked = rank_candidates(clusters)
    top = next(c for c in clusters if c.id == ranked[0].cluster_id)
    assert len(top) == 40
    assert ranked[0].similarity > ranked[1].similarity
    with pytest.raises(ContractViolation):
        rank_candidates(clusters, (1.8, 0.0))


def _arena():
    panel = PanelPlacement(10.0, 10.0, 30.0, 1.8, 0.3)
    distractors = (Distractor("crate", 6.0, 12.0, 0.0, 0.6, 0.6), Distractor("shelf", 13.0, 6.0, 80.0, 3.5, 0.4))
    return ArenaSpec((0.0, 0.0, 20.0, 20.0), panel, (), distractors)


START = (7.5, 14.33, -60.0)  # 5 m out along the panel normal


def test_find_panel_picks_the_panel_from_a_distance():
    arena = _arena()
    pose = START
    world = to_world(merged_base_points(arena, pose, LaserSpec(range_noise_sigma=0.01), 1), pose)
    search = find_panel(world, origin=pose[:2], seed=1)
    best = next(c for c in search.clusters if c.id == search.best.cluster_id)
    assert np.hypot(*(best.points[:, :2].mean(axis=0) - (10.0, 10.0))) < 1.0


def test_docking_report_in_panel_frame():
    panel = PanelPlacement(0.0, 0.0, 90.0, 1.8, 0.3)
    est = docking_report((-0.8, 0.25, 80.0), panel)
    assert est.d == pytest.approx(0.8 - 0.15)  # from the front face, half the thickness nearer
    assert est.o == pytest.approx(0.25)
    assert est.alpha == pytest.approx(10.0)


def test_docking_angle_uses_the_obtuse_branch():
    arena = ArenaSpec((-20.0, -20.0, 20.0, 20.0), PanelPlacement(0.0, 0.0, 0.0, 1.8, 0.3))
    h = math.radians(-120.0)
    pose = (-0.95 * math.sin(h), 0.95 * math.cos(h), -120.0)
    alpha = estimate_docking_angle(merged_base_points(arena, pose, LaserSpec(), 0), seed=0)
    assert alpha == pytest.approx(120.0, abs=0.5)


def test_simulated_docking_ends_beside_the_panel():
    arena = _arena()
    run = simulate_docking(arena, START, LaserSpec(range_noise_sigma=0.01), seed=3)
    assert run is not None
    assert abs(abs(run.estimate.d) - 0.8) < 0.06
    assert abs(run.estimate.o) < 0.06
