"""Plain-text tables, timing summaries, figures and run manifests."""
from __future__ import annotations

import hashlib
import json
import statistics
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


def summary(values: Sequence[float]) -> dict:
    """Average, median, max, min and sample standard deviation (0 for one value)."""
    v = [float(x) for x in values]
    if not v:
        raise ValueError("no values to summarise")
    return {"average": statistics.fmean(v), "median": statistics.median(v), "maximum": max(v),
            "minimum": min(v), "stddev": statistics.stdev(v) if len(v) > 1 else 0.0}


def table(header: Sequence[str], rows: Iterable[Sequence], title: Optional[str] = None) -> str:
    """Left-aligned first column, right-aligned others; cells are pre-formatted strings."""
    rows = [[str(c) for c in r] for r in rows]
    cols = list(zip(*([list(header)] + rows))) if rows else [[h] for h in header]
    widths = [max(len(c) for c in col) for col in cols]

    def fmt(r):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        return "  ".join(cells).rstrip()

    out = [title] if title else []
    out.append(fmt(list(header)))
    out.append("  ".join("-" * w for w in widths))
    out.extend(fmt(r) for r in rows)
    return "\n".join(out) + "\n"


def timing_table(label: str, seconds: Sequence[float]) -> str:
    s = summary(seconds)
    return table(["", "Average", "Median", "Maximum", "Minimum", "Std. deviation"],
                 [[f"{label} (s)", *(f"{s[k]:.3f}" for k in ("average", "median", "maximum", "minimum", "stddev"))]],
                 title=f"timing over {len(seconds)} run(s)")


def classifier_table(rows: Mapping[str, object]) -> str:
    """Accuracy / precision / recall / F2 in percent, one row per classifier or split."""
    body = []
    for name, m in rows.items():
        body.append([name, f"{100 * m.accuracy:.1f}%", f"{100 * m.precision:.1f}%", f"{100 * m.recall:.1f}%",
                     f"{100 * m.f2:.1f}%"])
    return table(["Classifier", "Accuracy", "Precision", "Recall", "F2"], body)


def valve_angle_table(per_angle: Mapping[float, Sequence[float]]) -> str:
    """Estimated angles per commanded angle, plus the mean absolute error."""
    body = []
    for angle in sorted(per_angle):
        est = per_angle[angle]
        s = summary(est)
        err = float(np.mean(np.abs(np.asarray(est, float) - angle)))
        body.append([f"{angle:g}", f"{s['average']:.2f}", f"{s['median']:.2f}", f"{s['maximum']:.2f}",
                     f"{s['minimum']:.2f}", f"{err:.2f}", str(len(est))])
    return table(["alpha (deg)", "Average", "Median", "Maximum", "Minimum", "Mean |err|", "N"], body)


def docking_table(d: Sequence[float], o: Sequence[float], alpha: Sequence[float], desired=(0.8, 0.0, 0.0)) -> str:
    body = []
    for name, vals, want, nd in (("d (m)", d, desired[0], 3), ("o (m)", o, desired[1], 3),
                                 ("alpha (deg)", alpha, desired[2], 2)):
        s = summary(vals)
        body.append([name, f"{want:.{nd}f}", *(f"{s[k]:.{nd}f}" for k in ("average", "median", "maximum", "minimum"))])
    return table(["", "Desired Value", "Average", "Median", "Max", "Min"], body)


def category_table(counts: Mapping[str, int], total: int) -> str:
    keys = list(counts)
    return table(keys, [[f"{100.0 * counts[k] / total:.0f}%" for k in keys], [str(counts[k]) for k in keys]])


# --- files ----------------------------------------------------------------


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text(path, text: str) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8", newline="\n")
    return p


def write_manifest(out_dir, command: str, seed: Optional[int], reps: int, params: Mapping, inputs: Sequence,
                   artifacts: Sequence) -> Path:
    """Everything needed to rerun: command, seed, parameters, input and output hashes.

    Timing files are left out on purpose; they are the only non-deterministic output.
    """
    out = Path(out_dir)
    doc = {
        "command": command,
        "seed": seed,
        "reps": reps,
        "parameters": {k: params[k] for k in sorted(params)},
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
        "artifacts": [{"path": Path(p).name, "sha256": sha256_file(p)} for p in sorted(artifacts, key=str)],
    }
    return write_text(out / "manifest.json", json.dumps(doc, indent=2, sort_keys=False) + "\n")


# --- figures --------------------------------------------------------------


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_figure(fig, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(p, dpi=100, metadata={"Software": None})
    _pyplot().close(fig)
    return p


def figure_scan(points: np.ndarray, boxes: Sequence[np.ndarray], labels: Sequence[str], path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 5))
    if len(points):
        ax.scatter(points[:, 0], points[:, 1], s=1, c="0.4")
    for corners, lab in zip(boxes, labels):
        c = np.vstack([corners, corners[:1]])
        ax.plot(c[:, 0], c[:, 1], lw=1.2)
        ax.annotate(lab, corners.mean(axis=0), fontsize=7)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    return save_figure(fig, path)


def figure_image(image: np.ndarray, boxes: Sequence, path, marks: Sequence = (), arrows: Sequence = ()):
    plt = _pyplot()
    h, w = image.shape
    fig, ax = plt.subplots(figsize=(w / 150, h / 150))
    ax.imshow(image, cmap="gray", vmin=0, vmax=255)
    for b in boxes:
        ax.add_patch(plt.Rectangle((b[0], b[1]), b[2], b[3], fill=False, ec="tab:orange", lw=1))
    for p in marks:
        ax.plot(p[0], p[1], "+", color="tab:red", ms=6)
    for (p, ang) in arrows:
        t = np.radians(ang)
        ax.arrow(p[0], p[1], 30 * np.cos(t), 30 * np.sin(t), color="tab:cyan", width=1)
    ax.set_axis_off()
    return save_figure(fig, path)


def figure_bars(labels: Sequence[str], values: Sequence[float], ylabel: str, path, errors=None):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(range(len(values)), values, yerr=errors, color="tab:blue", capsize=3)
    ax.set_xticks(range(len(values)))
    ax.set_xticklabels(labels)
    ax.set_ylabel(ylabel)
    return save_figure(fig, path)


def figure_trace(states: Sequence[str], path):
    plt = _pyplot()
    names = list(dict.fromkeys(states))
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.step(range(len(states)), [names.index(s) for s in states], where="post")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xlabel("tick")
    return save_figure(fig, path)
