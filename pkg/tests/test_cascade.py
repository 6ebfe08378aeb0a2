import json

import numpy as np
import pytest

from panelbot.cascade_detector import (Cascade, bundled_cascade, detect, evaluate, group_hits, iou, train_cascade)
from panelbot.datasets import build_dataset, probe_images
from panelbot.errors import ContractViolation, UndefinedMetricError


def test_iou_cases():
    assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert iou((0, 0, 10, 10), (20, 20, 5, 5)) == 0.0
    assert iou((0, 0, 10, 10), (5, 0, 10, 10)) == pytest.approx(50 / 150)
    assert iou((0, 0, 0, 0), (0, 0, 0, 0)) == 0.0


def test_metrics_against_hand_counts():
    m = evaluate([1, 1, 0, 0, 1, 0], [1, 0, 0, 1, 1, 0])
    assert (m.tp, m.tn, m.fp, m.fn) == (2, 2, 1, 1)
    assert m.precision == pytest.approx(2 / 3) and m.recall == pytest.approx(2 / 3)
    assert m.f2 == pytest.approx(2 / 3)
    assert m.accuracy == pytest.approx(4 / 6)


def test_metrics_zero_division_gives_zero():
    m = evaluate([0, 0, 0], [0, 0, 0])
    assert m.precision == 0.0 and m.recall == 0.0 and m.f2 == 0.0
    assert m.accuracy == 1.0


def test_evaluate_rejects_bad_input():
    with pytest.raises(UndefinedMetricError):
        evaluate([], [])
    with pytest.raises(ContractViolation):
        evaluate([1, 0], [1])


def test_group_hits_merges_overlaps():
    hits = np.array([[10, 10, 20, 20, 1.0], [11, 10, 20, 20, 1.0], [10, 11, 20, 20, 1.0],
                     [100, 100, 20, 20, 2.0]], float)
    (d,) = group_hits(hits, min_neighbors=3)
    assert d.neighbors == 3
    assert d.bbox == pytest.approx((31 / 3, 31 / 3, 20, 20))
    assert len(group_hits(hits, min_neighbors=1)) == 2
    assert group_hits(np.zeros((0, 5))) == []


def test_cascade_json_round_trip(tmp_path):
    c = bundled_cascade("valve")
    path = tmp_path / "c.json"
    c.save(path)
    assert Cascade.load(path) == c
    doc = json.loads(path.read_text())
    doc["version"] = 999
    with pytest.raises(ContractViolation):
        Cascade.from_dict(doc)


def test_unknown_bundled_kind():
    with pytest.raises(ValueError):
        bundled_cascade("hammer")


def test_tiny_training_is_seeded_and_separates():
    data = build_dataset("valve", 60, 150, seed=3, n_neg_images=0)
    a = train_cascade(data, stages=2, seed=1)
    b = train_cascade(data, stages=2, seed=1)
    assert a == b
    m = evaluate(a.classify_windows(data.positives + data.negatives),
                 [1] * len(data.positives) + [0] * len(data.negatives))
    assert m.recall > 0.9 and m.accuracy > 0.8


@pytest.mark.parametrize("kind", ["wrench", "valve"])
def test_bundled_cascade_finds_targets(kind):
    cascade = bundled_cascade(kind)
    found = total = 0
    for image, boxes in probe_images(kind, 3, seed=77):
        dets = detect(image, cascade)
        total += len(boxes)
        found += sum(any(iou(d.bbox, b) > 0.4 for d in dets) for b in boxes)
    assert found >= 0.8 * total
