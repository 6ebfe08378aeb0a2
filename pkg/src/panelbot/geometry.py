"""Closed-form geometry: PCA boxes, line/plane angles, rays and stereo.

Points are plain ``numpy`` arrays of shape (3,) or (N, 3). Angles are in
degrees at every public boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BehindCameraError, ContractViolation, DegenerateInputError, NoIntersectionError


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ContractViolation(f"expected (N, 3) points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ContractViolation("points must be finite")
    return pts


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ContractViolation("zero-length vector")
    return v / n


@dataclass(frozen=True)
class Plane:
    """Plane ``a*x + b*y + c*z + d = 0``."""

    a: float
    b: float
    c: float
    d: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)

    def normalize(self) -> "Plane":
        n = float(np.linalg.norm(self.normal))
        if n == 0.0:
            raise ContractViolation("plane normal has zero length")
        return Plane(self.a / n, self.b / n, self.c / n, self.d / n)

    def signed_distance(self, points) -> np.ndarray:
        p = self.normalize()
        return as_points(points) @ p.normal + p.d

    @classmethod
    def from_point_normal(cls, point, normal) -> "Plane":
        n = unit(normal)
        return cls(float(n[0]), float(n[1]), float(n[2]), float(-n @ np.asarray(point, dtype=float)))

    def transformed(self, transform: "RigidTransform") -> "Plane":
        """The same physical plane expressed in the frame ``transform`` maps into."""
        p = self.normalize()
        n = transform.rotation @ p.normal
        point = transform.apply(-p.d * p.normal)[0]
        return Plane.from_point_normal(point, n)


@dataclass(frozen=True)
class Line3:
    point: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "direction", unit(self.direction))


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    def apply(self, points) -> np.ndarray:
        return as_points(points) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def is_orthonormal(self, tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.rotation.T @ self.rotation, np.eye(3), atol=tol))


class ObbExtent(NamedTuple):
    sx: float
    sy: float
    sz: float

    def sorted_desc(self) -> tuple[float, float, float]:
        return tuple(sorted(self, reverse=True))  # type: ignore[return-value]


def rot_z(deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class PinholeCamera:
    """Ideal pinhole camera. ``pose`` maps camera coordinates to world.

    Camera frame: x right, y down, z along the optical axis.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    pose: RigidTransform = field(default_factory=RigidTransform)
    width: int = 964
    height: int = 724

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ContractViolation("focal lengths must be positive")

    @property
    def center(self) -> np.ndarray:
        return self.pose.translation

    def ray(self, u: float, v: float) -> np.ndarray:
        """Un-normalized ray (x_ray, y_ray, 1) in camera coordinates."""
        return np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])

    def project_camera(self, points_cam) -> np.ndarray:
        p = as_points(points_cam)
        z = p[:, 2]
        return np.column_stack([self.fx * p[:, 0] / z + self.cx, self.fy * p[:, 1] / z + self.cy])

    def world_to_camera(self, points) -> np.ndarray:
        return self.pose.inverse().apply(points)

    def project(self, points_world) -> np.ndarray:
        return self.project_camera(self.world_to_camera(points_world))


@dataclass(frozen=True)
class StereoRig:
    left: PinholeCamera
    right: PinholeCamera
    baseline: float

    def __post_init__(self):
        if not self.baseline > 0:
            raise ContractViolation("baseline must be positive")
        if not np.allclose(self.left.pose.rotation, self.right.pose.rotation, atol=1e-12):
            raise ContractViolation("rectified rig requires equal camera orientations")

    @classmethod
    def rectified(cls, left: PinholeCamera, baseline: float) -> "StereoRig":
        """Right camera displaced by ``baseline`` along the left camera's x axis."""
        offset = left.pose.rotation @ np.array([baseline, 0.0, 0.0])
        pose = RigidTransform(left.pose.rotation, left.pose.translation + offset)
        right = PinholeCamera(left.fx, left.fy, left.cx, left.cy, pose, left.width, left.height)
        return cls(left, right, baseline)


# --- statistics -----------------------------------------------------------

def mean_and_covariance(points) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and the 1/(N-1) normalized covariance."""
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        raise DegenerateInputError(f"need at least 2 points, got {n}")
    mu = pts.mean(axis=0)
    centered = pts - mu
    cov = centered.T @ centered / (n - 1)
    return mu, 0.5 * (cov + cov.T)


def _jacobi_eigen(a: np.ndarray, sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off < 1e-15 * max(1.0, float(np.abs(a).max())):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    return np.diag(a).copy(), v


def principal_components(cov) -> list[tuple[float, np.ndarray]]:
    """Eigenpairs of a symmetric 3x3 matrix, eigenvalues descending."""
    m = np.asarray(cov, dtype=float)
    if m.shape != (3, 3):
        raise ContractViolation(f"expected 3x3 matrix, got {m.shape}")
    if not np.allclose(m, m.T, atol=1e-9, rtol=0.0):
        raise ContractViolation("covariance must be symmetric")
    vals, vecs = _jacobi_eigen(0.5 * (m + m.T))
    order = sorted(range(3), key=lambda i: (-vals[i], i))
    return [(float(vals[i]), vecs[:, i] / np.linalg.norm(vecs[:, i])) for i in order]


def obb_of_cluster(points) -> tuple[RigidTransform, ObbExtent]:
    """PCA-aligned bounding box.

    The returned transform takes world points into the box frame whose rows
    are the principal axes; the extents are max - min along each axis.
    """
    pts = as_points(points)
    mu, cov = mean_and_covariance(pts)
    axes = np.array([vec for _, vec in principal_components(cov)])
    if np.linalg.det(axes) < 0:
        axes[2] = -axes[2]
    transform = RigidTransform(axes, -axes @ mu)
    local = transform.apply(pts)
    extent = local.max(axis=0) - local.min(axis=0)
    return transform, ObbExtent(*(float(abs(x)) for x in extent))


# --- angles, rays ---------------------------------------------------------

def line_plane_angle(line: Line3, plane: Plane) -> float:
    """Angle in [0, 90] between a line's direction and a plane's normal.

    Zero when the line runs along the normal.
    """
    normal = np.asarray(plane.normal, dtype=float)
    direction = np.asarray(line.direction, dtype=float)
    nn, dn = np.linalg.norm(normal), np.linalg.norm(direction)
    if nn == 0.0 or dn == 0.0:
        raise ContractViolation("line direction and plane normal must be non-zero")
    cosine = abs(float(normal @ direction)) / (nn * dn)
    return math.degrees(math.acos(min(1.0, cosine)))


def ray_plane_intersection(pixel: Sequence[float], camera: PinholeCamera, plane: Plane) -> np.ndarray:
    """Back-project a pixel onto a plane given in the camera frame.

    Returns the camera-frame point ``(t*x_ray, t*y_ray, t)`` with
    ``t = -D / (A*x_ray + B*y_ray + C)``.
    """
    x_ray, y_ray, _ = camera.ray(float(pixel[0]), float(pixel[1]))
    denom = plane.a * x_ray + plane.b * y_ray + plane.c
    if abs(denom) <= 1e-12:
        raise NoIntersectionError("ray is parallel to the plane")
    t = -plane.d / denom
    if t <= 0:
        raise NoIntersectionError("plane intersection lies behind the camera")
    return np.array([t * x_ray, t * y_ray, t])


def two_point_angle(center: Sequence[float], deep: Sequence[float], fold: bool = False) -> float:
    """Direction angle of ``deep - center`` in degrees, (-180, 180].

    With ``fold`` the result is reduced modulo 90 into [0, 90).
    """
    du = float(deep[0]) - float(center[0])
    dv = float(deep[1]) - float(center[1])
    if du == 0.0 and dv == 0.0:
        raise DegenerateInputError("coincident points have no direction")
    angle = math.degrees(math.atan2(dv, du))
    if fold:
        angle = angle % 90.0
        if angle >= 90.0:
            angle = 0.0
    return angle


def fold_angle(deg: float, period: float) -> float:
    out = deg % period
    return 0.0 if out >= period else out


def angular_difference(a: float, b: float, period: float = 360.0) -> float:
    """Smallest absolute difference between two angles modulo ``period``."""
    d = abs(a - b) % period
    return min(d, period - d)


def triangulate(pix_left: Sequence[float], pix_right: Sequence[float], rig: StereoRig) -> np.ndarray:
    """Midpoint of the common perpendicular of the two back-projected rays (world frame)."""
    disparity = float(pix_left[0]) - float(pix_right[0])
    if disparity <= 0:
        raise BehindCameraError(f"non-positive disparity {disparity:.6g}")
    c1, c2 = rig.left.center, rig.right.center
    d1 = rig.left.pose.rotation @ rig.left.ray(*pix_left)
    d2 = rig.right.pose.rotation @ rig.right.ray(*pix_right)
    w0 = c1 - c2
    a, b, c = d1 @ d1, d1 @ d2, d2 @ d2
    d, e = d1 @ w0, d2 @ w0
    denom = a * c - b * b
    if abs(denom) < 1e-18:
        raise BehindCameraError("rays are parallel")
    s = (b * e - c * d) / denom
    t = (a * e - b * d) / denom
    if s <= 0 or t <= 0:
        raise BehindCameraError("triangulated point lies behind the rig")
    return 0.5 * ((c1 + s * d1) + (c2 + t * d2))
