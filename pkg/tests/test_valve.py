import math

import numpy as np
import pytest

from panelbot.errors import StereoMismatch, ValveNotFound
from panelbot.geometry import PinholeCamera, StereoRig
from panelbot.valve_pipeline import find_square, square_in_roi, triangulate_valve, valve_center_orientation
from panelbot.vision_ops import Segment2


def square_segments(cx, cy, edge, angle_deg, shrink=0.05):
    """The four sides of a square, each cut short at both ends like Hough output."""
    a = math.radians(angle_deg)
    d = np.array([math.cos(a), math.sin(a)])
    n = np.array([-d[1], d[0]])
    c = np.array([cx, cy])
    corners = [c + (sx * d + sy * n) * edge / 2 for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))]
    out = []
    for p, q in zip(corners, corners[1:] + corners[:1]):
        p2, q2 = p + shrink * (q - p), q - shrink * (q - p)
        out.append(Segment2(*p2, *q2))
    return out


@pytest.mark.parametrize("angle", [0.0, 15.0, 30.0, 44.0, 72.0])
def test_square_centre_and_angle(angle):
    segs = square_segments(50.0, 40.0, 30.0, angle)
    hyp = find_square(segs + [Segment2(0, 0, 8, 70), Segment2(90, 10, 60, 12)], 30.0)
    centre, folded = valve_center_orientation(hyp)
    assert len(hyp.segments) == 4
    assert np.allclose(centre, (50.0, 40.0), atol=1e-6)
    assert folded == pytest.approx(angle % 90.0, abs=1e-6)


def test_square_is_permutation_invariant():
    rng = np.random.default_rng(0)
    segs = square_segments(50.0, 40.0, 30.0, 20.0) + [Segment2(*rng.uniform(0, 100, 4)) for _ in range(8)]
    ref = find_square(segs, 30.0)
    for _ in range(5):
        order = rng.permutation(len(segs))
        hyp = find_square([segs[i] for i in order], 30.0)
        assert hyp.indices == ref.indices
        assert np.allclose(hyp.center_2d, ref.center_2d)


def test_three_sides_still_give_the_centre():
    hyp = find_square(square_segments(50.0, 40.0, 30.0, 10.0)[:3], 30.0)
    assert len(hyp.segments) == 3
    assert np.allclose(hyp.center_2d, (50.0, 40.0), atol=0.5)


def test_no_square_raises():
    with pytest.raises(ValveNotFound):
        find_square([Segment2(0, 0, 30, 0), Segment2(0, 5, 30, 5)], 30.0)
    with pytest.raises(ValveNotFound):
        find_square([], 30.0)


def test_rendered_square_in_roi():
    img = np.full((80, 80), 190, np.uint8)
    yy, xx = np.mgrid[:80, :80]
    a = math.radians(25.0)
    u, v = (xx - 40) * math.cos(a) + (yy - 38) * math.sin(a), -(xx - 40) * math.sin(a) + (yy - 38) * math.cos(a)
    img[(np.abs(u) < 15) & (np.abs(v) < 15)] = 35
    _, centre, angle = square_in_roi(img, 30.0)
    assert np.linalg.norm(centre - (40, 38)) < 1.0
    assert abs(angle - 25.0) < 1.5


def test_stereo_checks():
    rig = StereoRig.rectified(PinholeCamera(1300.0, 1300.0, 481.5, 361.5), 0.1)
    x = np.array([0.02, -0.01, 0.4])
    pl, pr = rig.left.project(x)[0], rig.right.project(x)[0]
    assert np.allclose(triangulate_valve(pl, pr, rig), x, atol=1e-9)
    with pytest.raises(StereoMismatch):
        triangulate_valve(pl, pr + (0.0, 12.0), rig)
