"""Sequence I/O, one-pass evaluation metrics, subsampling, synthetic fixtures."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, center_distance, iou
from .imaging import load_frame, save_frame
from .synth import SceneSpec, render_scene

PRECISION_THRESHOLDS = np.arange(0, 51, 1, dtype=float)  # center distance, px
SUCCESS_THRESHOLDS = np.arange(0.0, 1.0001, 0.05)  # 21 overlap samples
GT_FILENAMES = ("groundtruth_rect.txt", "groundtruth.txt", "gt.txt")
IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class Sequence:
    """Ordered frames plus per-frame ground truth (None marks absent rows)."""

    frames: list  # np.ndarray or file path per frame
    ground_truth: list[Box | None]
    name: str = "sequence"

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.ground_truth):
            raise ValueError(
                f"{self.name}: {len(self.frames)} frames but "
                f"{len(self.ground_truth)} ground-truth rows"
            )

    def __len__(self) -> int:
        return len(self.frames)

    def frame(self, i: int) -> np.ndarray:
        f = self.frames[i]
        return load_frame(f) if isinstance(f, str) else f


@dataclass
class MetricReport:
    precision: np.ndarray  # rate per threshold in PRECISION_THRESHOLDS
    success: np.ndarray  # rate per threshold in SUCCESS_THRESHOLDS
    auc: float
    precision_score_20: float
    fps: float = 0.0
    name: str = "sequence"

    def summary_line(self) -> str:
        return f"{self.name},{self.auc:.6f},{self.precision_score_20:.6f},{self.fps:.3f}"


def parse_gt_line(line: str) -> Box | None:
    parts = line.replace(",", " ").split()
    if not parts:
        return None
    vals = [float(v) for v in parts[:4]]
    if any(math.isnan(v) for v in vals) or vals[2] <= 0 or vals[3] <= 0:
        return None
    # ground-truth files use a 1-based pixel origin
    return Box(vals[0] - 1.0, vals[1] - 1.0, vals[2], vals[3])


def load_sequence(path: str) -> Sequence:
    """Load an OTB-layout directory: numbered images + a ground-truth file."""
    img_dir = os.path.join(path, "img")
    if not os.path.isdir(img_dir):
        img_dir = path
    frames = sorted(
        os.path.join(img_dir, f)
        for f in os.listdir(img_dir)
        if f.lower().endswith(IMAGE_EXTS)
    )
    gt_path = None
    for name in GT_FILENAMES:
        cand = os.path.join(path, name)
        if os.path.isfile(cand):
            gt_path = cand
            break
    if gt_path is None:
        raise FileNotFoundError(f"no ground-truth file in {path}")
    with open(gt_path) as fh:
        gt = [parse_gt_line(line) for line in fh if line.strip()]
    if len(frames) != len(gt):
        raise ValueError(
            f"{path}: {len(frames)} frames but {len(gt)} ground-truth lines"
        )
    return Sequence(frames=frames, ground_truth=gt, name=os.path.basename(os.path.normpath(path)))


def save_sequence(seq: Sequence, path: str) -> None:
    """Write a sequence in the OTB layout consumed by load_sequence."""
    img_dir = os.path.join(path, "img")
    os.makedirs(img_dir, exist_ok=True)
    for i in range(len(seq)):
        save_frame(seq.frame(i), os.path.join(img_dir, f"{i + 1:04d}.png"))
    with open(os.path.join(path, "groundtruth_rect.txt"), "w") as fh:
        for b in seq.ground_truth:
            if b is None:
                fh.write("nan,nan,nan,nan\n")
            else:
                fh.write(f"{b.x + 1.0},{b.y + 1.0},{b.w},{b.h}\n")


def subsample(s: Sequence, stride: int) -> Sequence:
    """Every stride-th frame with aligned ground truth (low-frame-rate protocol)."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if stride == 1:
        return s
    return Sequence(
        frames=s.frames[::stride],
        ground_truth=s.ground_truth[::stride],
        name=f"{s.name}+{stride}",
    )


def _paired(pred: list[Box], gt: list[Box | None]) -> list[tuple[Box, Box]]:
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predictions vs {len(gt)} ground-truth boxes")
    pairs = [(p, g) for p, g in zip(pred, gt) if g is not None]
    if not pairs:
        raise ValueError("no evaluable frames (all ground truth absent)")
    return pairs


def precision_curve(pred: list[Box], gt: list[Box | None]) -> tuple[np.ndarray, float]:
    """Rate of frames whose center error is within each threshold; plus the
    20-px precision score."""
    pairs = _paired(pred, gt)
    dists = np.array([center_distance(p, g) for p, g in pairs])
    curve = np.array([(dists <= tau).mean() for tau in PRECISION_THRESHOLDS])
    return curve, float(curve[20])


def success_curve(pred: list[Box], gt: list[Box | None]) -> tuple[np.ndarray, float]:
    """Rate of frames with IoU strictly above each threshold; AUC is the mean
    of the 21 samples."""
    pairs = _paired(pred, gt)
    overlaps = np.array([iou(p, g) for p, g in pairs])
    curve = np.array([(overlaps > tau).mean() for tau in SUCCESS_THRESHOLDS])
    return curve, float(curve.mean())


def evaluate(pred: list[Box], gt: list[Box | None], fps: float = 0.0, name: str = "sequence") -> MetricReport:
    prec, ps20 = precision_curve(pred, gt)
    succ, auc = success_curve(pred, gt)
    assert np.all(np.diff(prec) >= 0), "precision curve must be non-decreasing"
    assert np.all(np.diff(succ) <= 0), "success curve must be non-increasing"
    return MetricReport(
        precision=prec, success=succ, auc=auc, precision_score_20=ps20, fps=fps, name=name
    )


def synth_sequence(spec: SceneSpec) -> Sequence:
    """Deterministic synthetic sequence with exact ground truth."""
    frames, gt = render_scene(spec)
    return Sequence(frames=frames, ground_truth=list(gt), name=f"synth-{spec.motion}-{spec.seed}")


def write_report_csv(report: MetricReport, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("curve,threshold,rate\n")
        for tau, v in zip(PRECISION_THRESHOLDS, report.precision):
            fh.write(f"precision,{tau:.0f},{v:.6f}\n")
        for tau, v in zip(SUCCESS_THRESHOLDS, report.success):
            fh.write(f"success,{tau:.2f},{v:.6f}\n")
        fh.write(f"summary,{report.summary_line()}\n")


def write_report_svg(report: MetricReport, path: str) -> None:
    """Minimal standalone SVG of the precision and success curves."""
    w, h, pad = 420, 200, 30

    def poly(xs, ys, color, x0):
        pts = " ".join(
            f"{x0 + pad + x * (150 / max(xs))},{h - pad - y * (h - 2 * pad)}"
            for x, y in zip(xs, ys)
        )
        return f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<text x="{pad}" y="14" font-size="10">precision (PS20={report.precision_score_20:.3f})</text>',
        f'<text x="{pad + 210}" y="14" font-size="10">success (AUC={report.auc:.3f})</text>',
        poly(PRECISION_THRESHOLDS, report.precision, "#1f77b4", 0),
        poly(SUCCESS_THRESHOLDS * 50, report.success, "#d62728", 210),
        "</svg>",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
