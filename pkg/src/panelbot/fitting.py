"""Seeded RANSAC line and plane fitting with least-squares refits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .geometry import Line3, Plane, as_points, mean_and_covariance, principal_components


@dataclass
class LineFit:
    line: Line3
    inliers: np.ndarray  # boolean mask
    outlier_ratio: float


@dataclass
class PlaneFit:
    plane: Plane
    inliers: np.ndarray
    outlier_ratio: float


def point_line_distance(points: np.ndarray, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    diff = points - origin
    along = diff @ direction
    return np.linalg.norm(diff - np.outer(along, direction), axis=1)


def fit_line_lsq(points) -> Line3:
    pts = as_points(points)
    mu, cov = mean_and_covariance(pts)
    return Line3(mu, principal_components(cov)[0][1])


def fit_plane_lsq(points) -> Plane:
    pts = as_points(points)
    mu, cov = mean_and_covariance(pts)
    normal = principal_components(cov)[2][1]
    return Plane.from_point_normal(mu, normal)


_CHUNK = 32  # hypotheses scored per batch


def _random_pairs(rng: np.random.Generator, n: int, k: int, iters: int) -> np.ndarray:
    out = np.empty((iters, k), dtype=np.int64)
    for i in range(iters):
        out[i] = rng.choice(n, size=k, replace=False)
    return out


def ransac_line(points, iters: int = 200, inlier_dist: float = 0.03, seed: int = 0) -> LineFit:
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        raise DegenerateInputError("line fit needs at least 2 points")
    rng = np.random.default_rng(seed)
    pairs = _random_pairs(rng, n, 2, iters)
    d = pts[pairs[:, 1]] - pts[pairs[:, 0]]
    norm = np.linalg.norm(d, axis=1)
    ok = norm >= 1e-12
    pairs, d = pairs[ok], d[ok] / norm[ok, None]
    counts = np.zeros(len(pairs), dtype=np.int64)
    for lo in range(0, len(pairs), _CHUNK):
        o, u = pts[pairs[lo:lo + _CHUNK, 0]], d[lo:lo + _CHUNK]
        diff = pts[None, :, :] - o[:, None, :]
        along = np.einsum("hnk,hk->hn", diff, u)
        dist = np.linalg.norm(diff - along[..., None] * u[:, None, :], axis=2)
        counts[lo:lo + _CHUNK] = (dist <= inlier_dist).sum(axis=1)
    best_mask, best_count = None, -1
    if len(pairs):
        b = int(np.argmax(counts))
        best_count = int(counts[b])
        best_mask = point_line_distance(pts, pts[pairs[b, 0]], d[b]) <= inlier_dist
    if best_mask is None:
        # every sampled pair coincided: all points identical
        raise DegenerateInputError("cannot fit a line to coincident points")
    if best_count >= 2:
        line = fit_line_lsq(pts[best_mask])
        # the refit may admit a slightly different inlier set
        refined = point_line_distance(pts, line.point, line.direction) <= inlier_dist
        if refined.sum() >= best_count:
            best_mask = refined
    else:
        line = fit_line_lsq(pts[:2])
    return LineFit(line, best_mask, 1.0 - float(best_mask.mean()))


def ransac_plane(points, iters: int = 200, inlier_dist: float = 0.01, seed: int = 0) -> PlaneFit:
    pts = as_points(points)
    n = len(pts)
    if n < 3:
        raise DegenerateInputError("plane fit needs at least 3 points")
    rng = np.random.default_rng(seed)
    tri = _random_pairs(rng, n, 3, iters)
    normals = np.cross(pts[tri[:, 1]] - pts[tri[:, 0]], pts[tri[:, 2]] - pts[tri[:, 0]])
    norm = np.linalg.norm(normals, axis=1)
    ok = norm >= 1e-12
    tri, normals = tri[ok], normals[ok] / norm[ok, None]
    offsets = np.einsum("hk,hk->h", pts[tri[:, 0]], normals)
    counts = np.zeros(len(tri), dtype=np.int64)
    for lo in range(0, len(tri), _CHUNK):
        dist = np.abs(pts @ normals[lo:lo + _CHUNK].T - offsets[lo:lo + _CHUNK])
        counts[lo:lo + _CHUNK] = (dist <= inlier_dist).sum(axis=0)
    best_mask = None
    if len(tri):
        b = int(np.argmax(counts))
        best_mask = np.abs((pts - pts[tri[b, 0]]) @ normals[b]) <= inlier_dist
    if best_mask is None:
        raise DegenerateInputError("all sampled triples were collinear")
    plane = fit_plane_lsq(pts[best_mask])
    return PlaneFit(plane, best_mask, 1.0 - float(best_mask.mean()))
