"""Frame I/O, grayscale conversion, Sobel gradients and thin-edge extraction."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Sobel kernels; gx responds to horizontal intensity change.
_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T

DEFAULT_EDGE_THRESHOLD = 0.1
MAX_EDGE_SIDE = 640


@dataclass
class GradientField:
    """Per-pixel gradient magnitude (>= 0) and orientation folded into [0, pi)."""

    magnitude: np.ndarray
    orientation: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


@dataclass
class EdgeMap:
    """Sparse thin edges: pixel coordinates, normalized magnitudes, orientations.

    Magnitudes are scaled so the strongest edge in the frame is 1. Every listed
    pixel survived non-maximal suppression along its gradient direction.
    """

    xs: np.ndarray  # int, pixel column
    ys: np.ndarray  # int, pixel row
    magnitude: np.ndarray  # in (0, 1]
    orientation: np.ndarray  # in [0, pi)
    width: int
    height: int

    def __len__(self) -> int:
        return len(self.xs)


def load_frame(path: str) -> np.ndarray:
    """Load an 8-bit image file as an (H, W, 3) RGB uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def load_raw_frame(path: str) -> np.ndarray:
    """Load a raw planar RGB dump; `<path>.hdr` holds "width height"."""
    with open(path + ".hdr") as fh:
        w, h = (int(v) for v in fh.read().split()[:2])
    data = np.fromfile(path, dtype=np.uint8)
    if data.size != 3 * w * h:
        raise ValueError(f"raw dump size {data.size} != 3*{w}*{h}")
    return np.moveaxis(data.reshape(3, h, w), 0, -1)


def save_frame(frame: np.ndarray, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    Image.fromarray(frame).save(path)


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    """Luminance 0.299 R + 0.587 G + 0.114 B, real-valued in [0, 255]."""
    if frame.ndim == 2:
        return frame.astype(np.float64)
    return frame.astype(np.float64) @ GRAY_WEIGHTS


def _convolve3(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid 3x3 convolution placed into a same-size array (border left zero)."""
    out = np.zeros_like(plane)
    acc = np.zeros((plane.shape[0] - 2, plane.shape[1] - 2))
    for di in range(3):
        for dj in range(3):
            acc += kernel[di, dj] * plane[di : di + acc.shape[0], dj : dj + acc.shape[1]]
    out[1:-1, 1:-1] = acc
    return out


def compute_gradients(luma: np.ndarray) -> GradientField:
    """3x3 Sobel responses; border pixels get zero magnitude."""
    if luma.shape[0] < 3 or luma.shape[1] < 3:
        raise ValueError("plane must be at least 3x3")
    gx = _convolve3(luma, _SOBEL_X)
    gy = _convolve3(luma, _SOBEL_Y)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), np.pi)
    ori[mag == 0.0] = 0.0
    return GradientField(magnitude=mag, orientation=ori)


def extract_edges(g: GradientField, mag_threshold: float = DEFAULT_EDGE_THRESHOLD) -> EdgeMap:
    """Thin edges: gradient-direction local maxima above a normalized threshold.

    A pixel survives when its magnitude is >= the neighbor behind it and
    strictly > the neighbor ahead along the gradient direction (the asymmetric
    comparison keeps plateaus one pixel wide), and its magnitude exceeds
    mag_threshold times the frame maximum.
    """
    if not (0.0 < mag_threshold < 1.0):
        raise ValueError("mag_threshold must be in (0, 1)")
    mag = g.magnitude
    h, w = mag.shape
    peak = float(mag.max())
    if peak == 0.0:
        empty = np.empty(0)
        return EdgeMap(empty.astype(int), empty.astype(int), empty, empty, w, h)

    norm = mag / peak
    # Quantize gradient orientation to one of 4 neighbor axes.
    sector = np.floor((g.orientation + np.pi / 8) / (np.pi / 4)).astype(int) % 4
    offsets = {0: (0, 1), 1: (-1, 1), 2: (-1, 0), 3: (-1, -1)}  # (dy, dx) per sector

    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = norm
    yy, xx = np.mgrid[0:h, 0:w]
    keep = norm > mag_threshold
    for s, (dy, dx) in offsets.items():
        sel = sector == s
        ahead = padded[1 + yy + dy, 1 + xx + dx]
        behind = padded[1 + yy - dy, 1 + xx - dx]
        keep &= np.where(sel, (norm > ahead) & (norm >= behind), True)
    ys, xs = np.nonzero(keep)
    return EdgeMap(
        xs=xs.astype(np.int64),
        ys=ys.astype(np.int64),
        magnitude=norm[ys, xs],
        orientation=g.orientation[ys, xs],
        width=w,
        height=h,
    )


def edges_from_frame(frame: np.ndarray, mag_threshold: float = DEFAULT_EDGE_THRESHOLD) -> EdgeMap:
    return extract_edges(compute_gradients(to_grayscale(frame)), mag_threshold)


def downscale_frame(frame: np.ndarray, max_side: int = MAX_EDGE_SIDE) -> tuple[np.ndarray, float]:
    """Nearest-neighbor shrink so max(width, height) <= max_side.

    Returns (frame, scale) where boxes in the scaled frame map back to the
    original by dividing coordinates by scale. scale == 1.0 means untouched.
    """
    h, w = frame.shape[:2]
    side = max(h, w)
    if side <= max_side:
        return frame, 1.0
    scale = max_side / side
    nh, nw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    ri = np.minimum((np.arange(nh) / scale).astype(int), h - 1)
    ci = np.minimum((np.arange(nw) / scale).astype(int), w - 1)
    return frame[np.ix_(ri, ci)], scale
