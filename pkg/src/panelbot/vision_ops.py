"""Classical image primitives written against plain numpy arrays.

Images are 2D ``uint8`` arrays indexed ``[v, u]``; binary images are
``bool`` arrays. Pixel coordinates handed out are ``(u, v)`` pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .errors import ContractViolation, DegenerateHullError

# --- Otsu -----------------------------------------------------------------


def otsu_threshold(image: np.ndarray) -> tuple[int, np.ndarray]:
    """Threshold maximizing the between-class variance; pixels > t are True.

    Class 0 holds values <= t. The comparison is exact (rational
    arithmetic), so ties resolve to the lowest threshold.
    """
    img = np.asarray(image)
    if img.size == 0:
        raise ContractViolation("empty image")
    hist = np.bincount(img.astype(np.int64).ravel(), minlength=256)[:256]
    n_total = int(hist.sum())
    s_total = int((hist * np.arange(256)).sum())
    best_t, best = 0, Fraction(-1)
    n0 = s0 = 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = n_total - n0
        if n0 == 0 or n1 == 0:
            score = Fraction(0)
        else:
            # w0*w1*(mu0-mu1)^2 scaled by n_total^2
            score = Fraction((n_total * s0 - n0 * s_total) ** 2, n0 * n1)
        if score > best:
            best, best_t = score, t
    return best_t, img > best_t


# --- contours -------------------------------------------------------------

# clockwise in image coordinates (v down), starting east; (dv, du)
_NEIGHBORS = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
_DIR_INDEX = {d: k for k, d in enumerate(_NEIGHBORS)}


@dataclass
class Contour:
    points: np.ndarray  # (K, 2) of (u, v)
    is_hole: bool
    parent: int  # index into the returned list, -1 for none
    label: int = 0

    def __len__(self):
        return len(self.points)


def trace_contours(binary: np.ndarray) -> list[Contour]:
    """Suzuki-Abe border following over 8-connected foreground.

    Returns outer borders and hole borders in raster discovery order, each
    with its parent border (-1 for the frame).
    """
    b = np.asarray(binary, dtype=bool)
    h, w = b.shape
    f = np.zeros((h + 2, w + 2), dtype=np.int64)
    f[1:-1, 1:-1] = b
    contours: list[Contour] = []
    # label -> (index in contours, is_hole); label 1 is the frame (a hole)
    kinds = {1: (-1, True)}
    nbd = 1
    # only pixels with a zero 4-neighbour can start or relabel a border
    inner = f[1:-1, 1:-1] != 0
    edge = np.zeros_like(f, dtype=bool)
    edge[1:-1, 1:-1] = inner & ~(f[:-2, 1:-1].astype(bool) & f[2:, 1:-1].astype(bool)
                                 & f[1:-1, :-2].astype(bool) & f[1:-1, 2:].astype(bool))
    rows, cols = np.nonzero(edge)
    for idx in range(len(rows)):
        i, j = int(rows[idx]), int(cols[idx])
        if idx == 0 or rows[idx - 1] != i:
            lnbd = 1
        fij = f[i, j]
        if fij == 0:
            continue
        start = None
        if fij == 1 and f[i, j - 1] == 0:
            nbd += 1
            start = (i, j - 1)
            hole = False
        elif fij >= 1 and f[i, j + 1] == 0:
            nbd += 1
            start = (i, j + 1)
            hole = True
            if fij > 1:
                lnbd = fij
        if start is not None:
            parent_idx, parent_hole = kinds.get(lnbd, (-1, True))
            # parent rule: same-kind border -> parent's parent
            if parent_hole == hole:
                parent = contours[parent_idx].parent if parent_idx >= 0 else -1
            else:
                parent = parent_idx
            pts = _follow(f, i, j, start, nbd)
            kinds[nbd] = (len(contours), hole)
            contours.append(Contour(np.array([(q[1] - 1, q[0] - 1) for q in pts]), hole, parent, nbd))
        if f[i, j] != 1:
            lnbd = abs(int(f[i, j]))
    return contours


def _follow(f: np.ndarray, i: int, j: int, start, nbd: int) -> list[tuple[int, int]]:
    d0 = _DIR_INDEX[(start[0] - i, start[1] - j)]
    # 3.1: clockwise search for a non-zero neighbour
    found = None
    for k in range(8):
        dv, du = _NEIGHBORS[(d0 + k) % 8]
        if f[i + dv, j + du] != 0:
            found = (i + dv, j + du)
            break
    if found is None:
        f[i, j] = -nbd
        return [(i, j)]
    i1, j1 = found
    i2, j2 = found
    i3, j3 = i, j
    pts = []
    while True:
        pts.append((i3, j3))
        # 3.3: counter-clockwise from the element after (i2, j2)
        d = _DIR_INDEX[(i2 - i3, j2 - j3)]
        east_zero = False
        i4 = j4 = None
        for k in range(1, 9):
            dd = (d - k) % 8
            dv, du = _NEIGHBORS[dd]
            if f[i3 + dv, j3 + du] != 0:
                i4, j4 = i3 + dv, j3 + du
                break
            if dd == 0:
                east_zero = True
        # 3.4
        if east_zero:
            f[i3, j3] = -nbd
        elif f[i3, j3] == 1:
            f[i3, j3] = nbd
        # 3.5
        if (i4, j4) == (i, j) and (i3, j3) == (i1, j1):
            break
        i2, j2, i3, j3 = i3, j3, i4, j4
    return pts


# --- convex hull ----------------------------------------------------------


def _inside_extremes(p: np.ndarray) -> np.ndarray:
    """Points strictly inside the quadrilateral of the x/y extremes; never hull vertices."""
    quad = p[[np.argmin(p[:, 0]), np.argmin(p[:, 1]), np.argmax(p[:, 0]), np.argmax(p[:, 1])]]
    inside = np.ones(len(p), dtype=bool)
    for a, b in zip(quad, np.roll(quad, -1, axis=0)):
        inside &= (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0]) > 0
    return inside


def convex_hull(points, return_indices: bool = False):
    """Andrew's monotone chain. Counter-clockwise in (x, y) terms, no collinear vertices."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateHullError("a hull needs at least 3 points")
    order = np.lexsort((np.arange(len(pts)), pts[:, 1], pts[:, 0]))
    srt = pts[order]
    fresh = np.ones(len(order), dtype=bool)
    fresh[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    uniq = order[fresh]
    uniq = uniq[~_inside_extremes(pts[uniq])].tolist()

    xy = {k: (float(pts[k, 0]), float(pts[k, 1])) for k in uniq}

    def chain(seq):
        out = []
        for k in seq:
            x, y = xy[k]
            while len(out) >= 2:
                ax, ay = xy[out[-2]]
                bx, by = xy[out[-1]]
                if (bx - ax) * (y - ay) - (by - ay) * (x - ax) > 0:
                    break
                out.pop()
            out.append(k)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("all points are collinear")
    return np.array(hull) if return_indices else pts[hull]


@dataclass
class Defect:
    start: int  # contour index of the hull vertex opening the defect
    end: int
    far: int  # deepest contour point
    depth: float


def convexity_defects(contour_pts: np.ndarray, hull_idx: np.ndarray) -> list[Defect]:
    """Deepest contour point between each pair of consecutive hull vertices."""
    pts = np.asarray(contour_pts, dtype=float)
    n = len(pts)
    idx = np.unique(np.asarray(hull_idx))
    out = []
    for a, b in zip(idx, np.roll(idx, -1)):
        span = (b - a) % n
        if span <= 1:
            continue
        seg = (a + np.arange(1, span)) % n
        p, q = pts[a], pts[b]
        edge = q - p
        length = float(np.hypot(*edge))
        if length == 0:
            continue
        d = np.abs(edge[0] * (pts[seg, 1] - p[1]) - edge[1] * (pts[seg, 0] - p[0])) / length
        k = int(np.argmax(d))
        out.append(Defect(int(a), int(b), int(seg[k]), float(d[k])))
    return out


# --- Canny ----------------------------------------------------------------


def gaussian_kernel(size: int = 5, sigma: float = 1.4) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


_SOBEL_U = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
_SOBEL_V = _SOBEL_U.T


def sobel(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient (du, dv) scaled to intensity units per pixel."""
    img = np.asarray(image, dtype=float)
    gu = ndimage.correlate(img, _SOBEL_U, mode="nearest") / 8.0
    gv = ndimage.correlate(img, _SOBEL_V, mode="nearest") / 8.0
    return gu, gv


def non_max_suppression(mag: np.ndarray, gu: np.ndarray, gv: np.ndarray) -> np.ndarray:
    """Keep pixels that are local maxima across the quantized gradient direction."""
    h, w = mag.shape
    pad = np.pad(mag, 1)
    angle = (np.degrees(np.arctan2(gv, gu)) + 180.0) % 180.0
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4
    # neighbour offsets (dv, du) along the gradient for each sector
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros_like(mag, dtype=bool)
    for s, (dv, du) in offsets.items():
        fwd = pad[1 + dv:1 + dv + h, 1 + du:1 + du + w]
        back = pad[1 - dv:1 - dv + h, 1 - du:1 - du + w]
        # strict on one side so plateaus of width two keep a single pixel
        keep |= (sector == s) & (mag > fwd) & (mag >= back)
    return keep & (mag > 0)


def canny(image: np.ndarray, low: float = 4.0, high: float = 10.0, sigma: float = 1.4) -> np.ndarray:
    """Gaussian 5x5 smoothing, Sobel, non-maximum suppression, hysteresis.

    Thresholds apply to the gradient magnitude in intensity units per pixel.
    """
    if not 0 <= low <= high:
        raise ContractViolation("need 0 <= low <= high")
    smooth = ndimage.correlate(np.asarray(image, dtype=float), gaussian_kernel(5, sigma), mode="nearest")
    gu, gv = sobel(smooth)
    mag = np.hypot(gu, gv)
    thin = non_max_suppression(mag, gu, gv)
    strong = thin & (mag >= high)
    weak = thin & (mag >= low)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3)))
    if count == 0:
        return np.zeros_like(weak)
    seeded = np.zeros(count + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return seeded[labels]


# --- probabilistic Hough --------------------------------------------------


@dataclass(frozen=True)
class Segment2:
    u1: float
    v1: float
    u2: float
    v2: float

    @property
    def length(self) -> float:
        return math.hypot(self.u2 - self.u1, self.v2 - self.v1)

    @property
    def angle(self) -> float:
        """Undirected direction in [0, 180) degrees."""
        return math.degrees(math.atan2(self.v2 - self.v1, self.u2 - self.u1)) % 180.0

    @property
    def p1(self) -> np.ndarray:
        return np.array([self.u1, self.v1])

    @property
    def p2(self) -> np.ndarray:
        return np.array([self.u2, self.v2])


def probabilistic_hough(edges: np.ndarray, rho_res: float = 1.0, theta_res: float = 1.0,
                        votes: int = 20, min_len: float = 20.0, max_gap: float = 3.0,
                        seed: int = 0, corridor: int = 0) -> list[Segment2]:
    """Progressive probabilistic Hough transform.

    Edge points are visited in a seeded random order; a point whose best
    accumulator cell reaches ``votes`` seeds a walk along that line, gaps up
    to ``max_gap`` pixels bridged. Walked pixels leave the edge map; a walk of
    at least ``min_len`` becomes a segment and its pixels are un-voted.
    ``theta_res`` is in degrees. ``corridor`` lets a walk step also take edge
    pixels up to that many pixels across the line.
    """
    if rho_res <= 0 or theta_res <= 0:
        raise ContractViolation("resolutions must be positive")
    mask = np.asarray(edges, dtype=bool).copy()
    h, w = mask.shape
    vs, us = np.nonzero(mask)
    if len(vs) == 0:
        return []
    n_theta = int(round(180.0 / theta_res))
    thetas = np.radians(np.arange(n_theta) * theta_res)
    cos_t, sin_t = np.cos(thetas) / rho_res, np.sin(thetas) / rho_res
    max_rho = math.hypot(w, h) / rho_res
    n_rho = int(math.ceil(2 * max_rho)) + 1
    offset = (n_rho - 1) // 2
    acc = np.zeros((n_theta, n_rho), dtype=np.int32)
    voted = np.zeros_like(mask)
    cols = np.arange(n_theta)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(vs))
    segments = []

    def rho_index(u, v):
        return np.rint(u * cos_t + v * sin_t).astype(np.int64) + offset

    for k in order:
        v0, u0 = int(vs[k]), int(us[k])
        if not mask[v0, u0]:
            continue
        r = rho_index(u0, v0)
        acc[cols, r] += 1
        voted[v0, u0] = True
        mask[v0, u0] = False
        best = int(np.argmax(acc[cols, r]))
        if acc[best, r[best]] < votes:
            continue
        # walk along the line direction, perpendicular to the normal
        t = thetas[best]
        du, dv = -math.sin(t), math.cos(t)
        ends = []
        for sign in (1, -1):
            ends.append(_walk(mask, u0, v0, sign * du, sign * dv, max_gap, h, w, (u0, v0), corridor))
        (ua, va), (ub, vb) = ends
        good = math.hypot(ua - ub, va - vb) >= min_len
        for (ue, ve), sign in zip(ends, (1, -1)):
            _clear(mask, voted, acc, rho_index, cols, u0, v0, sign * du, sign * dv, ue, ve, good, h, w, corridor)
        if good:
            segments.append(Segment2(float(ua), float(va), float(ub), float(vb)))
    return segments


def _steps(u0, v0, du, dv):
    """Integer pixels along a direction, stepping one pixel along the major axis."""
    if abs(du) >= abs(dv):
        su, sv = math.copysign(1.0, du), dv / abs(du)
    else:
        su, sv = du / abs(dv), math.copysign(1.0, dv)
    k = 1
    while True:
        yield int(round(u0 + k * su)), int(round(v0 + k * sv))
        k += 1


def _across(u, v, du, dv, corridor):
    """The step pixel, then its neighbours along the minor axis, nearest first."""
    yield u, v
    mu, mv = (0, 1) if abs(du) >= abs(dv) else (1, 0)
    for k in range(1, corridor + 1):
        yield u - k * mu, v - k * mv
        yield u + k * mu, v + k * mv


def _walk(mask, u0, v0, du, dv, max_gap, h, w, last, corridor=0):
    gap = 0
    for u, v in _steps(u0, v0, du, dv):
        if not (0 <= u < w and 0 <= v < h):
            break
        hit = next(((a, b) for a, b in _across(u, v, du, dv, corridor)
                    if 0 <= a < w and 0 <= b < h and mask[b, a]), None)
        if hit is not None:
            gap = 0
            last = (u, v)
        else:
            gap += 1
            if gap > max_gap:
                break
    return last


def _clear(mask, voted, acc, rho_index, cols, u0, v0, du, dv, ue, ve, good, h, w, corridor=0):
    if (ue, ve) == (u0, v0):
        return
    for u, v in _steps(u0, v0, du, dv):
        if not (0 <= u < w and 0 <= v < h):
            break
        for a, b in _across(u, v, du, dv, corridor):
            if 0 <= a < w and 0 <= b < h and mask[b, a]:
                if good and voted[b, a]:
                    acc[cols, rho_index(a, b)] -= 1
                mask[b, a] = False
        if (u, v) == (ue, ve):
            break


# --- LBP ------------------------------------------------------------------

LBP_WINDOW = 100
# neighbour (dv, du) -> bit weight
_LBP_OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]


def lbp_codes(image: np.ndarray) -> np.ndarray:
    """8-bit codes for every interior pixel; bit k set when neighbour k >= centre.

    Output has shape (H - 2, W - 2); border pixels have no code.
    """
    img = np.asarray(image, dtype=np.int16)
    h, w = img.shape
    center = img[1:-1, 1:-1]
    code = np.zeros(center.shape, dtype=np.uint8)
    for bit, (dv, du) in enumerate(_LBP_OFFSETS):
        nb = img[1 + dv:h - 1 + dv, 1 + du:w - 1 + du]
        code |= ((nb >= center).astype(np.uint8) << bit)
    return code


def cell_edges(size: int = LBP_WINDOW, grid: int = 8) -> np.ndarray:
    return np.rint(np.linspace(0, size, grid + 1)).astype(int)


def cell_index_map(size: int = LBP_WINDOW, grid: int = 8) -> np.ndarray:
    """Cell id for each interior pixel of a window (shape (size-2, size-2))."""
    edges = cell_edges(size, grid)
    coord = np.arange(1, size - 1)
    cid = np.searchsorted(edges, coord, side="right") - 1
    return cid[:, None] * grid + cid[None, :]


def lbp_features(window: np.ndarray, grid: int = 8) -> np.ndarray:
    """Concatenated per-cell 256-bin LBP histograms of a 100x100 window."""
    win = np.asarray(window)
    if win.shape != (LBP_WINDOW, LBP_WINDOW):
        raise ContractViolation(f"LBP window must be {LBP_WINDOW}x{LBP_WINDOW}, got {win.shape}")
    return _hist(lbp_codes(win), cell_index_map(LBP_WINDOW, grid), grid)


def _hist(codes, cells, grid):
    flat = cells.ravel().astype(np.int64) * 256 + codes.ravel()
    return np.bincount(flat, minlength=grid * grid * 256).astype(np.int32)


def lbp_features_batch(windows, grid: int = 8) -> np.ndarray:
    cells = cell_index_map(LBP_WINDOW, grid)
    out = np.empty((len(windows), grid * grid * 256), dtype=np.int32)
    for k, win in enumerate(windows):
        if np.shape(win) != (LBP_WINDOW, LBP_WINDOW):
            raise ContractViolation("LBP window must be 100x100")
        out[k] = _hist(lbp_codes(win), cells, grid)
    return out


# --- resampling -----------------------------------------------------------


def resize(image: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resample to ``shape`` (rows, cols), pixel centres aligned."""
    img = np.asarray(image, dtype=float)
    h, w = img.shape
    oh, ow = shape
    if (oh, ow) == (h, w):
        return img.copy()
    ys = (np.arange(oh) + 0.5) * h / oh - 0.5
    xs = (np.arange(ow) + 0.5) * w / ow - 0.5
    if oh < h or ow < w:
        # pre-blur when shrinking to limit aliasing
        sig = (max(h / oh, 1.0) - 1.0) / 2.0, (max(w / ow, 1.0) - 1.0) / 2.0
        if max(sig) > 0:
            img = ndimage.gaussian_filter(img, sig, mode="nearest")
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(ys - y0, 0, 1)[:, None]
    fx = np.clip(xs - x0, 0, 1)[None, :]
    # separable: rows first (contiguous gathers), then columns
    rows = img[y0] * (1 - fy) + img[y1] * fy
    return rows[:, x0] * (1 - fx) + rows[:, x1] * fx


def crop(image: np.ndarray, box) -> np.ndarray:
    """Crop ``box = (x, y, w, h)`` (floats rounded), padding with edge values outside."""
    x, y, bw, bh = (int(round(c)) for c in box)
    h, w = image.shape
    if x >= 0 and y >= 0 and x + bw <= w and y + bh <= h:
        return image[y:y + bh, x:x + bw]
    ys = np.clip(np.arange(y, y + bh), 0, h - 1)
    xs = np.clip(np.arange(x, x + bw), 0, w - 1)
    return image[np.ix_(ys, xs)]
