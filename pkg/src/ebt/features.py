"""Spatial-pyramid intensity histograms, intersection kernel, NCC matching."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

from .geometry import Box
from .imaging import to_grayscale

PATCH_SIZE = 64  # canonical raster before histogramming
BINS = 16
COLOR_LEVELS = 5  # 55 cells * 3 channels * 16 bins = 2640
GRAY_LEVELS = 4  # 30 cells * 1 channel * 16 bins = 480 (ablation feature)


def feature_dim(levels: int, channels: int) -> int:
    cells = sum(L * L for L in range(1, levels + 1))
    return cells * channels * BINS


@lru_cache(maxsize=None)
def _cell_maps(levels: int) -> np.ndarray:
    """(levels, 64, 64) map of pixel -> global cell index (level-major)."""
    maps = np.empty((levels, PATCH_SIZE, PATCH_SIZE), dtype=np.int64)
    offset = 0
    for li, L in enumerate(range(1, levels + 1)):
        rows = np.minimum(np.arange(PATCH_SIZE) * L // PATCH_SIZE, L - 1)
        maps[li] = offset + rows[:, None] * L + rows[None, :]
        offset += L * L
    return maps


def sample_patch(frame: np.ndarray, b: Box, size: int = PATCH_SIZE) -> np.ndarray:
    """Nearest-neighbor resample of the box region to a size x size raster."""
    h, w = frame.shape[:2]
    cx = np.clip(np.floor(b.x + (np.arange(size) + 0.5) * b.w / size).astype(int), 0, w - 1)
    cy = np.clip(np.floor(b.y + (np.arange(size) + 0.5) * b.h / size).astype(int), 0, h - 1)
    return frame[np.ix_(cy, cx)]


def pyramid_feature(frame: np.ndarray, b: Box, levels: int = COLOR_LEVELS, color: bool = True) -> np.ndarray:
    """Concatenated per-cell 16-bin intensity histograms over an L x L pyramid.

    Each (cell, channel) block is L1-normalized. Layout: level, cell
    (row-major), channel, bin. The default 5-level RGB variant is 2640-D; the
    4-level grayscale variant is 480-D.
    """
    patch = sample_patch(frame, b)
    if color:
        if patch.ndim != 3:
            patch = np.repeat(patch[:, :, None], 3, axis=2)
        values = patch.astype(np.int64)
        channels = 3
    else:
        values = np.minimum(to_grayscale(patch).astype(np.int64), 255)[:, :, None]
        channels = 1
    bins = values >> 4
    cells = _cell_maps(levels)
    total_cells = sum(L * L for L in range(1, levels + 1))
    idx = (cells[:, :, :, None] * channels + np.arange(channels)) * BINS + bins[None]
    counts = np.bincount(idx.ravel(), minlength=total_cells * channels * BINS).astype(np.float64)
    blocks = counts.reshape(-1, BINS)
    sums = blocks.sum(axis=1, keepdims=True)
    np.divide(blocks, sums, out=blocks, where=sums > 0)
    return blocks.ravel()


def intersection_kernel(a: np.ndarray, b: np.ndarray) -> float:
    """Histogram intersection: sum of elementwise minima."""
    if a.shape != b.shape:
        raise ValueError("feature dimensions differ")
    return float(np.minimum(a, b).sum())


@njit(cache=True)
def intersection_kernel_matrix(a, b):  # pragma: no cover - thin numba kernel
    """(N, M) intersection-kernel Gram matrix for rows of a and b."""
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                s += min(a[i, k], b[j, k])
            out[i, j] = s
    return out


@dataclass
class NccTemplate:
    """Fixed grayscale template captured once; never updated afterwards."""

    patch: np.ndarray  # (H, W) float, mean-subtracted copy kept alongside
    mean: float
    norm: float  # sqrt of sum of squared deviations

    @classmethod
    def from_frame(cls, frame: np.ndarray, b: Box) -> "NccTemplate":
        tw = max(4, int(round(b.w)))
        th = max(4, int(round(b.h)))
        gray = to_grayscale(frame)
        patch = _resample_gray(gray, b, tw, th)
        mean = float(patch.mean())
        norm = float(np.sqrt(((patch - mean) ** 2).sum()))
        if norm <= 1e-9:
            raise ValueError("template patch has zero variance")
        return cls(patch=patch, mean=mean, norm=norm)

    @property
    def shape(self) -> tuple[int, int]:
        return self.patch.shape


def _resample_gray(gray: np.ndarray, b: Box, tw: int, th: int) -> np.ndarray:
    h, w = gray.shape
    cx = np.clip(np.floor(b.x + (np.arange(tw) + 0.5) * b.w / tw).astype(int), 0, w - 1)
    cy = np.clip(np.floor(b.y + (np.arange(th) + 0.5) * b.h / th).astype(int), 0, h - 1)
    return gray[np.ix_(cy, cx)]


def ncc_score(frame: np.ndarray, b: Box, t: NccTemplate, gray: np.ndarray | None = None) -> float:
    """Pearson correlation of the candidate patch with the template.

    The candidate is resampled to the template raster. Zero-variance
    candidates score 0 by convention.
    """
    if gray is None:
        gray = to_grayscale(frame)
    th, tw = t.shape
    patch = _resample_gray(gray, b, tw, th)
    dev = patch - patch.mean()
    denom = np.sqrt((dev**2).sum()) * t.norm
    if denom <= 1e-9:
        return 0.0
    return float((dev * (t.patch - t.mean)).sum() / denom)


def ncc_response_map(frame: np.ndarray, t: NccTemplate) -> np.ndarray:
    """NCC at every valid alignment via FFT correlation + running sums.

    Output shape is (H - th + 1, W - tw + 1). Positions where the local window
    has (near-)zero variance score 0.
    """
    gray = to_grayscale(frame) if frame.ndim == 3 else frame.astype(np.float64)
    th, tw = t.shape
    if gray.shape[0] < th or gray.shape[1] < tw:
        raise ValueError("template larger than frame")
    tdev = t.patch - t.mean
    npix = th * tw
    cross = fftconvolve(gray, tdev[::-1, ::-1], mode="valid")
    ones = np.ones((th, tw))
    local_sum = fftconvolve(gray, ones, mode="valid")
    local_sumsq = fftconvolve(gray**2, ones, mode="valid")
    local_var = np.maximum(local_sumsq - local_sum**2 / npix, 0.0)
    denom = np.sqrt(local_var) * t.norm
    out = np.zeros_like(cross)
    np.divide(cross, denom, out=out, where=denom > 1e-6)
    return np.clip(out, -1.0, 1.0)
