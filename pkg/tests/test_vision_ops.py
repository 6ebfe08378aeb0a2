from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from panelbot.errors import ContractViolation, DegenerateHullError
from panelbot.vision_ops import (canny, convex_hull, convexity_defects, crop, lbp_codes, lbp_features,
                                 otsu_threshold, probabilistic_hough, resize, trace_contours)


def otsu_brute(img):
    vals = img.ravel().astype(float)
    best_t, best = 0, -1.0
    for t in range(256):
        lo, hi = vals[vals <= t], vals[vals > t]
        score = 0.0 if not len(lo) or not len(hi) else len(lo) * len(hi) * (lo.mean() - hi.mean()) ** 2
        if score > best * (1 + 1e-12):
            best, best_t = score, t
    return best_t


def components_bfs(mask):
    """8-connected foreground components by flood fill."""
    seen = np.zeros_like(mask, dtype=bool)
    h, w = mask.shape
    count = 0
    for v in range(h):
        for u in range(w):
            if mask[v, u] and not seen[v, u]:
                count += 1
                seen[v, u] = True
                q = deque([(v, u)])
                while q:
                    a, b = q.popleft()
                    for da in (-1, 0, 1):
                        for db in (-1, 0, 1):
                            y, x = a + da, b + db
                            if 0 <= y < h and 0 <= x < w and mask[y, x] and not seen[y, x]:
                                seen[y, x] = True
                                q.append((y, x))
    return count


def test_otsu_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(25):
        a, b = sorted(rng.integers(0, 256, 2))
        img = np.concatenate([rng.normal(a, 12, 400), rng.normal(b, 12, 300)]).clip(0, 255).astype(np.uint8)
        t, mask = otsu_threshold(img.reshape(20, 35))
        assert t == otsu_brute(img)
        assert mask.sum() == (img > t).sum()


def test_otsu_rejects_empty():
    with pytest.raises(ContractViolation):
        otsu_threshold(np.zeros((0, 0), np.uint8))


def test_outer_contours_match_flood_fill():
    rng = np.random.default_rng(1)
    for _ in range(20):
        mask = rng.random((30, 40)) > 0.7
        outer = [c for c in trace_contours(mask) if not c.is_hole]
        assert len(outer) == components_bfs(mask)


def test_ring_has_a_hole_with_its_parent():
    yy, xx = np.mgrid[:40, :40]
    r = np.hypot(yy - 20, xx - 20)
    contours = trace_contours((r < 15) & (r > 7))
    holes = [c for c in contours if c.is_hole]
    assert len(contours) == 2 and len(holes) == 1
    assert not contours[holes[0].parent].is_hole


def test_contour_points_are_on_the_border():
    mask = np.zeros((20, 20), bool)
    mask[5:15, 3:12] = True
    (c,) = trace_contours(mask)
    us, vs = c.points[:, 0], c.points[:, 1]
    assert mask[vs, us].all()
    assert (us.min(), us.max(), vs.min(), vs.max()) == (3, 11, 5, 14)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 60))
def test_hull_half_planes_and_scipy_vertices(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 30, (n, 2)).astype(float)
    try:
        hull = convex_hull(pts)
    except DegenerateHullError:
        assert np.linalg.matrix_rank(pts - pts[0]) < 2 or len(np.unique(pts, axis=0)) < 3
        return
    # every point lies on or left of every counter-clockwise edge
    for a, b in zip(hull, np.roll(hull, -1, axis=0)):
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        assert (cross >= -1e-9).all()
    ref = {tuple(p) for p in pts[ConvexHull(pts).vertices]}
    assert {tuple(p) for p in hull} == ref


def test_hull_indices_point_into_input():
    pts = np.array([[0, 0], [2, 0], [1, 1], [2, 2], [0, 2], [1, 0.5]], float)
    idx = convex_hull(pts, return_indices=True)
    assert sorted(idx.tolist()) == [0, 1, 3, 4]


def test_convexity_defect_finds_notch_bottom():
    # U shape: the deepest point of the notch is its bottom
    contour = np.array([[0, 0], [10, 0], [10, 10], [7, 10], [7, 3], [3, 3], [3, 10], [0, 10]], float)
    hull = convex_hull(contour, return_indices=True)
    deepest = max(convexity_defects(contour, hull), key=lambda d: d.depth)
    assert deepest.depth == pytest.approx(7.0)
    assert tuple(contour[deepest.far]) in {(7.0, 3.0), (3.0, 3.0)}


def test_canny_marks_a_vertical_step():
    img = np.full((40, 40), 50, np.uint8)
    img[:, 20:] = 200
    edges = canny(img)
    cols = np.nonzero(edges[5:35].any(axis=0))[0]
    assert set(cols) <= {19, 20}
    assert edges[5:35].any(axis=1).all()


def test_hough_finds_a_diagonal_line():
    edges = np.zeros((60, 60), bool)
    for k in range(10, 50):
        edges[k, k] = True
    segs = probabilistic_hough(edges, votes=10, min_len=20, max_gap=2, seed=0)
    assert len(segs) == 1
    assert segs[0].angle == pytest.approx(45.0, abs=1.0)
    assert segs[0].length > 35


def test_hough_is_seeded():
    rng = np.random.default_rng(2)
    edges = rng.random((50, 50)) > 0.97
    edges[10, 5:45] = True
    a = probabilistic_hough(edges, votes=10, min_len=10, seed=5)
    b = probabilistic_hough(edges, votes=10, min_len=10, seed=5)
    assert a == b


def test_lbp_code_bits():
    patch = np.array([[9, 9, 0], [0, 5, 9], [0, 0, 9]], np.uint8)
    # neighbours clockwise from top-left: 9 9 0 9 9 0 0 0 -> bits 0, 1, 3, 4
    assert lbp_codes(patch)[0, 0] == 0b00011011


def test_lbp_features_shape_and_total():
    win = np.random.default_rng(3).integers(0, 255, (100, 100)).astype(np.uint8)
    f = lbp_features(win)
    assert f.shape == (8 * 8 * 256,)
    assert f.sum() == 98 * 98
    with pytest.raises(ContractViolation):
        lbp_features(win[:50])


def test_resize_identity_and_constant():
    img = np.random.default_rng(4).random((12, 17))
    assert np.array_equal(resize(img, img.shape), img)
    assert np.allclose(resize(np.full((40, 30), 7.0), (13, 9)), 7.0)


def test_crop_pads_with_edge_values():
    img = np.arange(16, dtype=np.uint8).reshape(4, 4)
    out = crop(img, (-1, -1, 3, 3))
    assert out.shape == (3, 3)
    assert out[0, 0] == img[0, 0] and out[2, 2] == img[1, 1]
