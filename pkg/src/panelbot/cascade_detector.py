"""LBP boosted cascade: training, sliding-window detection, mining, metrics."""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ContractViolation, TrainingFailure, UndefinedMetricError
from .vision_ops import LBP_WINDOW, _hist, cell_edges, cell_index_map, crop, lbp_codes, lbp_features_batch, resize

CASCADE_FORMAT = "panelbot-lbp-cascade"
CASCADE_VERSION = 1
GRID = 8
NEGATIVE_IOU = 0.5  # a window overlapping any target less than this is a negative
N_FEATURES = GRID * GRID * 256


# --- data -----------------------------------------------------------------


@dataclass
class NegativeImage:
    image: np.ndarray
    exclusions: tuple = ()  # (x, y, w, h) boxes that must not be sampled


@dataclass
class Dataset:
    positives: list  # 100x100 windows
    negatives: list = field(default_factory=list)  # 100x100 windows
    negative_images: list = field(default_factory=list)  # NegativeImage
    positive_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        for w in list(self.positives) + list(self.negatives):
            if np.shape(w) != (LBP_WINDOW, LBP_WINDOW):
                raise ContractViolation("dataset windows must be 100x100")
        if self.positive_weights is None:
            self.positive_weights = np.ones(len(self.positives))

    @property
    def counts(self) -> dict:
        return {"positives": len(self.positives), "negatives": len(self.negatives),
                "negative_images": len(self.negative_images)}

    def split(self, train_fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        rng = np.random.default_rng(seed)
        pi = rng.permutation(len(self.positives))
        ni = rng.permutation(len(self.negatives))
        kp = int(round(train_fraction * len(pi)))
        kn = int(round(train_fraction * len(ni)))
        train = Dataset([self.positives[i] for i in pi[:kp]], [self.negatives[i] for i in ni[:kn]],
                        list(self.negative_images), self.positive_weights[pi[:kp]].copy())
        test = Dataset([self.positives[i] for i in pi[kp:]], [self.negatives[i] for i in ni[kn:]])
        return train, test


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _iou_matrix(boxes: np.ndarray) -> np.ndarray:
    x0, y0 = boxes[:, 0], boxes[:, 1]
    x1, y1 = x0 + boxes[:, 2], y0 + boxes[:, 3]
    iw = np.clip(np.minimum(x1[:, None], x1[None]) - np.maximum(x0[:, None], x0[None]), 0, None)
    ih = np.clip(np.minimum(y1[:, None], y1[None]) - np.maximum(y0[:, None], y0[None]), 0, None)
    inter = iw * ih
    area = boxes[:, 2] * boxes[:, 3]
    return inter / (area[:, None] + area[None] - inter)


def window_from(image: np.ndarray, box) -> np.ndarray:
    """Crop ``box`` and resample to the 100x100 detector window."""
    patch = crop(image, box)
    return np.rint(resize(patch, (LBP_WINDOW, LBP_WINDOW))).clip(0, 255).astype(np.uint8)


def sample_negative_windows(neg: NegativeImage, count: int, rng: np.random.Generator,
                            min_side: float = 60.0, max_side: float = 260.0, max_iou: float = NEGATIVE_IOU,
                            max_tries: Optional[int] = None) -> list:
    """Random square windows avoiding the exclusion boxes."""
    h, w = neg.image.shape
    out, tries = [], 0
    hi = min(max_side, h, w)
    limit = max_tries if max_tries is not None else 50 * count
    while len(out) < count and tries < limit and hi >= min_side:
        tries += 1
        side = float(np.exp(rng.uniform(np.log(min_side), np.log(hi))))
        x, y = float(rng.uniform(0, w - side)), float(rng.uniform(0, h - side))
        box = (x, y, side, side)
        if any(iou(box, e) >= max_iou for e in neg.exclusions):
            continue
        out.append(window_from(neg.image, box))
    return out


# --- model ----------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    feature: int  # cell * 256 + bin
    threshold: float
    polarity: int  # +1: fires when value > threshold, -1: when value < threshold
    weight: float

    @property
    def cell(self) -> int:
        return self.feature // 256

    @property
    def bin(self) -> int:
        return self.feature % 256

    def fires(self, values: np.ndarray) -> np.ndarray:
        return (self.polarity * (values - self.threshold)) > 0


@dataclass(frozen=True)
class CascadeStage:
    stumps: tuple
    threshold: float
    detection_rate: float  # achieved on training positives
    false_positive_rate: float  # achieved on the stage's negatives

    def scores(self, features: np.ndarray) -> np.ndarray:
        s = np.zeros(len(features))
        for st in self.stumps:
            s += np.where(st.fires(features[:, st.feature]), st.weight, 0.0)
        return s


@dataclass(frozen=True)
class Cascade:
    stages: tuple
    window: int = LBP_WINDOW
    grid: int = GRID
    meta: dict = field(default_factory=dict, compare=False)

    def stage_reached(self, features: np.ndarray) -> np.ndarray:
        """Number of stages each sample passes before its first rejection."""
        x = np.asarray(features)
        reached = np.zeros(len(x), dtype=int)
        alive = np.arange(len(x))
        for k, st in enumerate(self.stages):
            if not len(alive):
                break
            ok = st.scores(x[alive]) >= st.threshold
            alive = alive[ok]
            reached[alive] = k + 1
        return reached

    def classify(self, features: np.ndarray) -> np.ndarray:
        return self.stage_reached(features) == len(self.stages)

    def classify_windows(self, windows) -> np.ndarray:
        if not len(windows):
            return np.zeros(0, dtype=bool)
        return self.classify(lbp_features_batch(windows, self.grid))

    def to_dict(self) -> dict:
        return {
            "format": CASCADE_FORMAT, "version": CASCADE_VERSION,
            "window": self.window, "grid": self.grid, "meta": self.meta,
            "stages": [{"threshold": s.threshold, "detection_rate": s.detection_rate,
                        "false_positive_rate": s.false_positive_rate,
                        "stumps": [{"feature": t.feature, "cell": t.cell, "bin": t.bin, "threshold": t.threshold,
                                    "polarity": t.polarity, "weight": t.weight} for t in s.stumps]}
                       for s in self.stages],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Cascade":
        if doc.get("format") != CASCADE_FORMAT or doc.get("version") != CASCADE_VERSION:
            raise ContractViolation(f"not a version {CASCADE_VERSION} {CASCADE_FORMAT} document")
        stages = tuple(CascadeStage(tuple(Stump(int(t["feature"]), float(t["threshold"]), int(t["polarity"]),
                                                float(t["weight"])) for t in s["stumps"]),
                                    float(s["threshold"]), float(s["detection_rate"]),
                                    float(s["false_positive_rate"])) for s in doc["stages"])
        return cls(stages, int(doc["window"]), int(doc["grid"]), dict(doc.get("meta", {})))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Cascade":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@functools.lru_cache(maxsize=None)
def bundled_cascade(kind: str) -> Cascade:
    """The pre-trained wrench or valve cascade shipped with the package."""
    if kind not in ("wrench", "valve"):
        raise ValueError(f"no bundled cascade for {kind!r}")
    text = resources.files("panelbot").joinpath("data").joinpath(f"{kind}_cascade.json").read_text(encoding="utf-8")
    return Cascade.from_dict(json.loads(text))


# --- training -------------------------------------------------------------


@dataclass(frozen=True)
class StageTargets:
    detection_rate: float = 0.995
    false_positive_rate: float = 0.5
    max_stumps: int = 50


def _best_stump(xp: np.ndarray, xn: np.ndarray, wp: np.ndarray, wn: np.ndarray, shortlist: int):
    """Exhaustive threshold search over the ``shortlist`` most separating features."""
    # weighted first/second moments per feature rank candidates cheaply
    sp, sn = wp.sum(), wn.sum()
    mp = (wp @ xp) / sp
    mn = (wn @ xn) / sn
    vp = (wp @ (xp * xp)) / sp - mp * mp
    vn = (wn @ (xn * xn)) / sn - mn * mn
    sep = np.abs(mp - mn) / np.sqrt(np.maximum(vp + vn, 0.0) + 1e-6)
    k = min(shortlist, sep.size)
    cand = np.sort(np.argpartition(-sep, k - 1)[:k])
    x = np.vstack([xp[:, cand], xn[:, cand]])
    w = np.concatenate([wp, wn])
    is_pos = np.concatenate([np.ones(len(wp), bool), np.zeros(len(wn), bool)])
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    wsort = w[order]
    possort = is_pos[order]
    cp = np.cumsum(np.where(possort, wsort, 0.0), axis=0)
    cn = np.cumsum(np.where(possort, 0.0, wsort), axis=0)
    valid = np.zeros_like(xs, dtype=bool)
    valid[:-1] = xs[:-1] < xs[1:]
    err_hi = cp + (sn - cn)  # fires above threshold
    err_lo = (sp - cp) + cn  # fires below threshold
    err_hi = np.where(valid, err_hi, np.inf)
    err_lo = np.where(valid, err_lo, np.inf)
    i_hi = np.unravel_index(int(np.argmin(err_hi)), err_hi.shape)
    i_lo = np.unravel_index(int(np.argmin(err_lo)), err_lo.shape)
    if err_hi[i_hi] <= err_lo[i_lo]:
        (r, c), pol, err = i_hi, 1, float(err_hi[i_hi])
    else:
        (r, c), pol, err = i_lo, -1, float(err_lo[i_lo])
    if not math.isfinite(err):
        return None
    thr = (float(xs[r, c]) + float(xs[r + 1, c])) / 2.0
    return int(cand[c]), thr, pol, err / (sp + sn)


def _train_stage(xp, xn, pos_prior, targets: StageTargets, stage_index: int, shortlist: int) -> CascadeStage:
    wp = pos_prior / pos_prior.sum() / 2.0
    wn = np.full(len(xn), 0.5 / len(xn))
    stumps: list[Stump] = []
    sp_score = np.zeros(len(xp))
    sn_score = np.zeros(len(xn))
    k = int(math.floor((1.0 - targets.detection_rate) * len(xp)))
    while len(stumps) < targets.max_stumps:
        found = _best_stump(xp, xn, wp, wn, shortlist)
        if found is None:
            break
        feat, thr, pol, eps = found
        eps = min(max(eps, 1e-10), 0.5 - 1e-10)
        beta = eps / (1.0 - eps)
        alpha = math.log(1.0 / beta)
        stump = Stump(feat, thr, pol, alpha)
        stumps.append(stump)
        fp_hit = stump.fires(xp[:, feat])
        fn_hit = stump.fires(xn[:, feat])
        sp_score += np.where(fp_hit, alpha, 0.0)
        sn_score += np.where(fn_hit, alpha, 0.0)
        # correct samples are down-weighted
        wp = np.where(fp_hit, wp * beta, wp)
        wn = np.where(fn_hit, wn, wn * beta)
        total = wp.sum() + wn.sum()
        wp, wn = wp / total, wn / total
        # recompute with the stage routine so thresholds match evaluation bit for bit
        stage = CascadeStage(tuple(stumps), 0.0, 0.0, 0.0)
        ps, ns = stage.scores(xp), stage.scores(xn)
        thr_stage = float(np.sort(ps)[k])
        det = float(np.mean(ps >= thr_stage))
        fpr = float(np.mean(ns >= thr_stage))
        if fpr <= targets.false_positive_rate:
            return CascadeStage(tuple(stumps), thr_stage, det, fpr)
    raise TrainingFailure(f"stage {stage_index}: false-positive target {targets.false_positive_rate} "
                          f"not reached within {targets.max_stumps} stumps", stage=stage_index)


def train_cascade(data: Dataset, stages: int = 10, targets: StageTargets = StageTargets(), seed: int = 0,
                  min_negatives: int = 20, shortlist: int = 256, mine_stride: int = 8, log=None) -> Cascade:
    """Train stage by stage; each stage sees only negatives the earlier stages accept.

    When the surviving negatives drop below ``min_negatives`` the pool is
    refilled from ``data.negative_images``; training ends early if that is
    impossible.
    """
    if len(data.positives) < 2:
        raise ContractViolation("need positives to train")
    rng = np.random.default_rng(seed)
    xp = lbp_features_batch(data.positives).astype(np.float64)
    pos_prior = np.asarray(data.positive_weights, dtype=float)
    pool_size = max(len(data.negatives), min_negatives)
    xn = lbp_features_batch(data.negatives).astype(np.float64) if data.negatives else np.zeros((0, N_FEATURES))
    built: list[CascadeStage] = []
    for s in range(stages):
        partial = Cascade(tuple(built))
        if built and len(xn):
            xn = xn[partial.classify(xn)]
        if len(xn) < min_negatives and data.negative_images:
            xn = _refill(xn, partial, data.negative_images, pool_size, rng, mine_stride)
        if len(xn) < min_negatives and built:
            break
        if len(xn) == 0:
            raise TrainingFailure("no negative windows available", stage=s)
        stage = _train_stage(xp, xn, pos_prior, targets, s, shortlist)
        built.append(stage)
        if log:
            log(f"stage {s}: {len(stage.stumps)} stumps, det {stage.detection_rate:.4f}, "
                f"fp {stage.false_positive_rate:.4f}, negatives {len(xn)}")
        if stage.false_positive_rate == 0.0 and not data.negative_images:
            break
    meta = {"seed": int(seed), "positives": len(data.positives), "negatives": len(data.negatives),
            "detection_rate_target": targets.detection_rate,
            "false_positive_rate_target": targets.false_positive_rate, "max_stumps": targets.max_stumps}
    return Cascade(tuple(built), meta=meta)


def _refill(xn: np.ndarray, partial: Cascade, images: Sequence[NegativeImage], target: int,
            rng: np.random.Generator, stride: int = 8, batch: int = 200, max_batches: int = 10) -> np.ndarray:
    """Top up the negatives with windows the partial cascade still accepts.

    Scanned false positives come first (they are the hard ones); random
    windows fill whatever is left.
    """
    parts = [xn]
    have = len(xn)
    if partial.stages:
        mined = []
        for neg in images:
            hits = raw_hits(neg.image, partial, stride=stride)
            for x, y, w, h, _ in hits:
                if all(iou((x, y, w, h), e) < NEGATIVE_IOU for e in neg.exclusions):
                    mined.append((neg.image, (x, y, w, h)))
        if mined:
            pick = rng.permutation(len(mined))[: max(target - have, 0)]
            wins = [window_from(mined[i][0], mined[i][1]) for i in np.sort(pick)]
            if wins:
                feats = lbp_features_batch(wins).astype(np.float64)
                parts.append(feats[partial.classify(feats)])
                have += len(parts[-1])
    for b in range(max_batches):
        if have >= target:
            break
        img = images[int(rng.integers(len(images)))]
        wins = sample_negative_windows(img, batch, rng)
        if not wins:
            continue
        feats = lbp_features_batch(wins).astype(np.float64)
        keep = feats[partial.classify(feats)] if partial.stages else feats
        parts.append(keep[: target - have])
        have += len(parts[-1])
    return np.vstack(parts)


# --- detection ------------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    bbox: tuple  # x, y, w, h in pixels
    score: float
    neighbors: int = 1


def _cell_ranges(size: int, grid: int):
    e = cell_edges(size, grid)
    lo = np.maximum(e[:-1], 1) - 1
    hi = np.minimum(e[1:], size - 1) - 1
    return lo, hi


class _LevelFeatures:
    """Per-bin integral images of one pyramid level, built on demand."""

    def __init__(self, codes: np.ndarray, grid: int, window: int):
        self.codes = codes
        self.grid = grid
        self.window = window
        self.integrals: dict[int, np.ndarray] = {}
        self.lo, self.hi = _cell_ranges(window, grid)
        self.cells = cell_index_map(window, grid)

    def integral(self, b: int) -> np.ndarray:
        it = self.integrals.get(b)
        if it is None:
            it = np.zeros((self.codes.shape[0] + 1, self.codes.shape[1] + 1), dtype=np.int32)
            body = it[1:, 1:]
            np.equal(self.codes, b, out=body, casting="unsafe")
            np.cumsum(body, axis=1, out=body)
            np.add.accumulate(body, axis=0, out=body)
            self.integrals[b] = it
        return it

    def values(self, feature: int, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        cell, b = divmod(feature, 256)
        ci, cj = divmod(cell, self.grid)
        it = self.integral(b)
        r0, r1 = ys + self.lo[ci], ys + self.hi[ci]
        c0, c1 = xs + self.lo[cj], xs + self.hi[cj]
        return (it[r1, c1] - it[r0, c1] - it[r1, c0] + it[r0, c0]).astype(np.float64)

    def full(self, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
        w = self.window - 2
        out = np.empty((len(ys), self.grid * self.grid * 256), dtype=np.float64)
        for k, (y, x) in enumerate(zip(ys, xs)):
            out[k] = _hist(self.codes[y:y + w, x:x + w], self.cells, self.grid)
        return out


def _scan_level(level: np.ndarray, cascade: Cascade, stride: int, direct_below: int = 64):
    """Windows of one level accepted by every stage, with the final-stage margin."""
    win = cascade.window
    h, w = level.shape
    if h < win or w < win:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    feats = _LevelFeatures(lbp_codes(level), cascade.grid, win)
    gy, gx = np.meshgrid(np.arange(0, h - win + 1, stride), np.arange(0, w - win + 1, stride), indexing="ij")
    ys, xs = gy.ravel(), gx.ravel()
    margin = np.zeros(len(ys))
    for k, st in enumerate(cascade.stages):
        if not len(ys):
            break
        if len(ys) <= direct_below:
            # few survivors: histogram them outright and finish the cascade
            x = feats.full(ys, xs)
            keep = np.ones(len(ys), bool)
            for st2 in cascade.stages[k:]:
                sc = st2.scores(x)
                margin = sc - st2.threshold
                keep &= sc >= st2.threshold
            return ys[keep], xs[keep], margin[keep]
        s = np.zeros(len(ys))
        for t in st.stumps:
            s += np.where(t.fires(feats.values(t.feature, ys, xs)), t.weight, 0.0)
        ok = s >= st.threshold
        ys, xs, margin = ys[ok], xs[ok], (s - st.threshold)[ok]
    return ys, xs, margin


def pyramid_scales(shape, window: int = LBP_WINDOW, scale_factor: float = 1.1,
                   min_size: Optional[float] = None, max_size: Optional[float] = None) -> list[float]:
    h, w = shape
    s = (min_size if min_size is not None else window) / window
    top = min(h, w) if max_size is None else min(h, w, max_size)
    out = []
    while window * s <= top + 1e-9:
        out.append(s)
        s *= scale_factor
    return out


def raw_hits(image: np.ndarray, cascade: Cascade, scale_factor: float = 1.1, stride: int = 4,
             min_size: Optional[float] = None, max_size: Optional[float] = None):
    """Every accepted window as (x, y, w, h, margin), ordered by (level, row, column)."""
    img = np.asarray(image, dtype=float)
    H, W = img.shape
    rows = []
    for s in pyramid_scales(img.shape, cascade.window, scale_factor, min_size, max_size):
        lh, lw = int(round(H / s)), int(round(W / s))
        if lh < cascade.window or lw < cascade.window:
            continue
        level = np.rint(resize(img, (lh, lw))).clip(0, 255)
        ys, xs, m = _scan_level(level, cascade, stride)
        sy, sx = H / lh, W / lw
        for y, x, mm in zip(ys, xs, m):
            rows.append((x * sx, y * sy, cascade.window * sx, cascade.window * sy, float(mm)))
    return np.array(rows, dtype=float).reshape(-1, 5)


def group_hits(hits: np.ndarray, min_neighbors: int = 3, iou_link: float = 0.3) -> list[Detection]:
    """Connected components under IoU >= ``iou_link``; margin-weighted mean box per group."""
    if not len(hits):
        return []
    n = len(hits)
    link = _iou_matrix(hits[:, :4]) >= iou_link
    labels = -np.ones(n, dtype=int)
    cur = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = cur
        while stack:
            j = stack.pop()
            for k in np.flatnonzero(link[j] & (labels < 0)):
                labels[k] = cur
                stack.append(k)
        cur += 1
    out = []
    for g in range(cur):
        mem = hits[labels == g]
        if len(mem) < min_neighbors:
            continue
        wts = mem[:, 4] + 1e-3
        box = tuple(float(v) for v in (wts @ mem[:, :4]) / wts.sum())
        score = len(mem) + math.tanh(float(mem[:, 4].mean()))
        out.append(Detection(box, score, len(mem)))
    out.sort(key=lambda d: (-d.score, d.bbox[1], d.bbox[0]))
    return out


def detect(image: np.ndarray, cascade: Cascade, scale_factor: float = 1.1, stride: int = 4,
           min_neighbors: int = 3, min_size: Optional[float] = None, max_size: Optional[float] = None,
           ) -> list[Detection]:
    if not cascade.stages:
        return []
    hits = raw_hits(image, cascade, scale_factor, stride, min_size, max_size)
    return group_hits(hits, min_neighbors)


# --- mining ---------------------------------------------------------------


def hard_negative_mine(cascade: Cascade, data: Dataset, negative_images: Sequence[NegativeImage], rounds: int = 1,
                       seed: int = 0, train_kwargs: Optional[dict] = None, detect_kwargs: Optional[dict] = None,
                       boost: float = 2.0) -> tuple[Dataset, Cascade]:
    """Append detector false positives to the negatives, up-weight missed positives, retrain."""
    if rounds < 1:
        raise ContractViolation("rounds must be >= 1")
    train_kwargs = dict(train_kwargs or {})
    detect_kwargs = dict(detect_kwargs or {})
    for r in range(rounds):
        mined = []
        for neg in negative_images:
            for d in detect(neg.image, cascade, **detect_kwargs):
                if all(iou(d.bbox, e) < NEGATIVE_IOU for e in neg.exclusions):
                    mined.append(window_from(neg.image, d.bbox))
        missed = ~cascade.classify_windows(data.positives) if data.positives else np.zeros(0, bool)
        if not mined and not missed.any():
            break
        weights = np.where(missed, data.positive_weights * boost, data.positive_weights)
        data = Dataset(list(data.positives), list(data.negatives) + mined, list(data.negative_images), weights)
        cascade = train_cascade(data, seed=seed, **train_kwargs)
    return data, cascade


# --- metrics --------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / (self.tp + self.tn + self.fp + self.fn)

    @property
    def precision(self) -> float:
        # zero predicted positives: no false alarms were raised
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f2(self) -> float:
        p, r = self.precision, self.recall
        den = 2 ** 2 * p + r
        return (1 + 2 ** 2) * p * r / den if den else 0.0

    def row(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall, "f2": self.f2}


def evaluate(predictions, labels) -> MetricsReport:
    p = np.asarray(predictions, dtype=bool).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if len(p) != len(y):
        raise ContractViolation("predictions and labels differ in length")
    if len(p) == 0:
        raise UndefinedMetricError("no samples to evaluate")
    return MetricsReport(int(np.sum(p & y)), int(np.sum(~p & ~y)), int(np.sum(p & ~y)), int(np.sum(~p & y)))
