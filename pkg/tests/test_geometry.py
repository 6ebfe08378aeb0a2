import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panelbot.errors import BehindCameraError, DegenerateInputError, NoIntersectionError
from panelbot.geometry import (Line3, PinholeCamera, Plane, RigidTransform, StereoRig, angular_difference,
                               fold_angle, line_plane_angle, mean_and_covariance, obb_of_cluster,
                               principal_components, ray_plane_intersection, rot_z, triangulate, two_point_angle)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def dlt_triangulate(rig, pl, pr):
    """Linear triangulation from the two 3x4 projection matrices."""
    rows = []
    for cam, (u, v) in ((rig.left, pl), (rig.right, pr)):
        k = np.array([[cam.fx, 0, cam.cx], [0, cam.fy, cam.cy], [0, 0, 1.0]])
        inv = cam.pose.inverse()
        p = k @ np.column_stack([inv.rotation, inv.translation])
        rows += [u * p[2] - p[0], v * p[2] - p[1]]
    _, _, vt = np.linalg.svd(np.array(rows))
    x = vt[-1]
    return x[:3] / x[3]


def test_covariance_matches_numpy():
    pts = np.random.default_rng(0).normal(size=(50, 3))
    mu, cov = mean_and_covariance(pts)
    assert np.allclose(mu, pts.mean(axis=0))
    assert np.allclose(cov, np.cov(pts.T))


def test_covariance_needs_two_points():
    with pytest.raises(DegenerateInputError):
        mean_and_covariance([[1.0, 2.0, 3.0]])


def test_principal_components_against_eigh():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T
        mine = principal_components(cov)
        vals, vecs = np.linalg.eigh(cov)
        assert np.allclose([v for v, _ in mine], vals[::-1], atol=1e-9)
        for (_, v), ref in zip(mine, vecs[:, ::-1].T):
            assert abs(abs(v @ ref) - 1.0) < 1e-8


def test_obb_of_axis_aligned_box():
    xs, ys, zs = np.meshgrid([0, 4.0], [0, 1.0], [0, 0.25])
    pts = np.column_stack([xs.ravel(), ys.ravel(), zs.ravel()])
    assert np.allclose(obb_of_cluster(pts)[1].sorted_desc(), (4.0, 1.0, 0.25))


def test_obb_of_planar_cluster_close_to_rotation_grid_minimum():
    """For an elongated cloud the PCA box should be near the minimal-area one."""
    rng = np.random.default_rng(2)
    pts = np.column_stack([rng.uniform(-0.9, 0.9, 300), rng.uniform(-0.05, 0.05, 300), np.zeros(300)])
    pts = pts @ rot_z(27.0).T
    best = min((np.ptp(pts[:, :2] @ [math.cos(t), math.sin(t)]) * np.ptp(pts[:, :2] @ [-math.sin(t), math.cos(t)]), t)
               for t in np.radians(np.arange(0, 180, 0.05)))
    ext = obb_of_cluster(pts)[1].sorted_desc()
    assert ext[0] * ext[1] <= best[0] * 1.05


def test_line_plane_angle():
    plane = Plane(0.0, 1.0, 0.0, 0.0)
    assert line_plane_angle(Line3([0, 0, 0], [0, 1, 0]), plane) == pytest.approx(0.0)
    assert line_plane_angle(Line3([0, 0, 0], [1, 0, 0]), plane) == pytest.approx(90.0)
    assert line_plane_angle(Line3([0, 0, 0], [1, 1, 0]), plane) == pytest.approx(45.0)


def test_ray_plane_intersection_failures():
    cam = PinholeCamera(1000.0, 1000.0, 500.0, 400.0)
    with pytest.raises(NoIntersectionError):
        ray_plane_intersection((500.0, 400.0), cam, Plane(1.0, 0.0, 0.0, -1.0))  # parallel to the axis
    with pytest.raises(NoIntersectionError):
        ray_plane_intersection((500.0, 400.0), cam, Plane(0.0, 0.0, 1.0, 2.0))  # z = -2 lies behind


def test_triangulation_agrees_with_dlt_under_noise():
    rng = np.random.default_rng(3)
    for _ in range(50):
        left = PinholeCamera(1300.0, 1300.0, 481.5, 361.5, RigidTransform(random_rotation(rng), rng.normal(size=3)))
        rig = StereoRig.rectified(left, 0.1)
        x = left.pose.apply([[*rng.uniform(-0.2, 0.2, 2), rng.uniform(0.3, 1.5)]])[0]
        pl = rig.left.project(x)[0] + rng.normal(0, 0.3, 2)
        pr = rig.right.project(x)[0] + rng.normal(0, 0.3, 2)
        assert np.linalg.norm(triangulate(pl, pr, rig) - dlt_triangulate(rig, pl, pr)) < 2e-3


def test_triangulation_rejects_negative_disparity():
    rig = StereoRig.rectified(PinholeCamera(1000.0, 1000.0, 0.0, 0.0), 0.1)
    with pytest.raises(BehindCameraError):
        triangulate((10.0, 0.0), (20.0, 0.0), rig)


def test_two_point_angle():
    assert two_point_angle((0, 0), (1, 0)) == 0.0
    assert two_point_angle((0, 0), (0, 1)) == 90.0
    assert two_point_angle((0, 0), (-1, 0)) == 180.0
    assert two_point_angle((0, 0), (-1, -1), fold=True) == pytest.approx(45.0)
    with pytest.raises(DegenerateInputError):
        two_point_angle((2, 3), (2, 3))


def test_fold_angle_range():
    assert fold_angle(-0.0, 90.0) == 0.0
    assert fold_angle(90.0, 90.0) == 0.0
    assert fold_angle(-1e-18, 90.0) == 0.0
    assert fold_angle(95.0, 90.0) == pytest.approx(5.0)


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_angular_difference_bounds(a, b):
    d = angular_difference(a, b)
    assert 0.0 <= d <= 180.0
    assert d == pytest.approx(angular_difference(b, a), abs=1e-6)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_rigid_transform_inverse(seed):
    rng = np.random.default_rng(seed)
    t = RigidTransform(random_rotation(rng), rng.normal(size=3) * 10)
    pts = rng.normal(size=(5, 3))
    assert np.allclose(t.inverse().apply(t.apply(pts)), pts, atol=1e-9)
    assert t.compose(t.inverse()).is_orthonormal()
    assert np.allclose(t.compose(t.inverse()).matrix(), np.eye(4), atol=1e-9)


def test_plane_transformed_keeps_points_on_plane():
    rng = np.random.default_rng(4)
    plane = Plane.from_point_normal([0.2, -0.1, 1.0], [0.1, 0.3, 1.0])
    t = RigidTransform(random_rotation(rng), rng.normal(size=3))
    p = np.array([[0.2, -0.1, 1.0]])
    assert abs(plane.transformed(t).signed_distance(t.apply(p))[0]) < 1e-12
