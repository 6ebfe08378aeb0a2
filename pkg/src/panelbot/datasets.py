"""Synthetic detector datasets cut from seeded panel renders."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .cascade_detector import NEGATIVE_IOU, Dataset, NegativeImage, iou, sample_negative_windows, window_from
from .scenario import random_panel_scene
from .scene_sim import VALVE_BODY_RATIO, WINDOW_RATIO, facing_camera, render_panel_image, valve_truth, wrench_truth

TARGETS = ("wrench", "valve")


def valve_box(scene, camera) -> tuple:
    vt = valve_truth(scene, camera)
    side = WINDOW_RATIO * 2 * VALVE_BODY_RATIO * vt["edge_px"]
    c = vt["center_px"]
    return (float(c[0] - side / 2), float(c[1] - side / 2), float(side), float(side))


def _inside(box, shape) -> bool:
    x, y, w, h = box
    return x >= 0 and y >= 0 and x + w <= shape[1] and y + h <= shape[0]


def render_sample(kind: str, rng: np.random.Generator, noise_sigma: float = 4.0):
    """One random render and the truth boxes of every target of ``kind`` in it."""
    scene = random_panel_scene(rng, target_width=float(rng.choice([19.0, 22.0, 24.0, 27.0])),
                               tilt=12.0)
    if kind == "wrench":
        cam = facing_camera(float(rng.uniform(-0.03, 0.03)), float(rng.uniform(-0.06, -0.02)),
                            float(rng.uniform(0.7, 0.95)))
    else:
        v = scene.valve
        cam = facing_camera(v.x / 1000 + float(rng.uniform(-0.08, 0.08)), v.y / 1000 + float(rng.uniform(-0.05, 0.05)),
                            float(rng.uniform(0.32, 0.5)) + scene.stem_height / 1000)
    image = render_panel_image(scene, cam, lighting_seed=int(rng.integers(2 ** 31)), noise_sigma=noise_sigma)
    if kind == "wrench":
        boxes = [wrench_truth(scene, i, cam).box for i in range(len(scene.wrenches))]
    else:
        boxes = [valve_box(scene, cam)]
    return image, [tuple(float(c) for c in b) for b in boxes]


def _jitter(box, rng, shift: float = 0.04, scale: float = 0.05):
    x, y, w, h = box
    s = float(np.exp(rng.uniform(-scale, scale)))
    nw = w * s
    cx = x + w / 2 + rng.uniform(-shift, shift) * w
    cy = y + h / 2 + rng.uniform(-shift, shift) * h
    return (cx - nw / 2, cy - nw / 2, nw, nw)


def _near_miss(box, rng):
    """A window that overlaps the target without counting as a hit."""
    x, y, w, h = box
    for _ in range(50):
        mode = rng.integers(3)
        if mode == 0:
            s = float(rng.choice([rng.uniform(0.3, 0.5), rng.uniform(2.0, 2.8)]))
            nw = w * s
            cx, cy = x + w / 2 + rng.uniform(-0.2, 0.2) * w, y + h / 2 + rng.uniform(-0.2, 0.2) * h
        else:
            nw = w * float(np.exp(rng.uniform(-0.2, 0.2)))
            ang = rng.uniform(0, 2 * np.pi)
            dist = rng.uniform(0.3, 1.1) * w
            cx, cy = x + w / 2 + dist * np.cos(ang), y + h / 2 + dist * np.sin(ang)
        cand = (cx - nw / 2, cy - nw / 2, nw, nw)
        if iou(cand, box) < NEGATIVE_IOU:
            return cand
    return None


def build_dataset(kind: str, n_pos: int = 300, n_neg: int = 1000, seed: int = 0, n_neg_images: int = 8,
                  near_miss_fraction: float = 0.4, noise_sigma: float = 4.0) -> Dataset:
    if kind not in TARGETS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    rng = np.random.default_rng(seed)
    pos, neg, neg_images = [], [], []
    while len(pos) < n_pos or len(neg) < n_neg:
        image, boxes = render_sample(kind, rng, noise_sigma)
        for b in boxes:
            if len(pos) < n_pos and _inside(b, image.shape):
                pos.append(window_from(image, _jitter(b, rng)))
        per_image = max(1, n_neg * len(boxes) // max(n_pos, 1) + 2)
        want = min(per_image, n_neg - len(neg))
        n_miss = int(round(want * near_miss_fraction))
        for _ in range(n_miss):
            nm = _near_miss(boxes[int(rng.integers(len(boxes)))], rng)
            if nm is not None and all(iou(nm, b) < NEGATIVE_IOU for b in boxes):
                neg.append(window_from(image, nm))
        rest = want - n_miss
        if rest > 0:
            neg.extend(sample_negative_windows(NegativeImage(image, tuple(boxes)), rest, rng))
        del neg[n_neg:]
    for _ in range(n_neg_images):
        image, boxes = render_sample(kind, rng, noise_sigma)
        neg_images.append(NegativeImage(image, tuple(boxes)))
    return Dataset(pos, neg, neg_images)


def probe_images(kind: str, count: int, seed: int, noise_sigma: float = 4.0) -> list:
    """Held-out renders with their truth boxes, for detection-level checks."""
    rng = np.random.default_rng(seed)
    return [render_sample(kind, rng, noise_sigma) for _ in range(count)]
