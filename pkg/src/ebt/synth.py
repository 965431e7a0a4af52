"""Synthetic tracking sequences with exact ground truth.

Scenes contain a textured rectangular target moving over a smooth background
littered with random edge-bearing clutter shapes. Rendering is deterministic
given the scene spec's seed, so sequences double as regression fixtures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Box


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    frame_count: int = 1
    target_w: int = 40
    target_h: int = 50
    motion: str = "smooth"  # "static" | "smooth" | "teleport"
    speed: float = 3.0  # px/frame for smooth motion
    teleport_min: float = 150.0
    teleport_max: float = 250.0
    clutter: int = 8
    seed: int = 0
    margin: int = 6

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.target_w + 2 * self.margin > self.width or self.target_h + 2 * self.margin > self.height:
            raise ValueError("target larger than frame interior")
        if self.motion not in ("static", "smooth", "teleport"):
            raise ValueError(f"unknown motion mode {self.motion!r}")


def _draw_rect(img: np.ndarray, x: int, y: int, w: int, h: int, color: np.ndarray) -> None:
    img[max(y, 0) : y + h, max(x, 0) : x + w] = color


def _draw_ellipse(img: np.ndarray, cx: float, cy: float, a: float, b: float, color: np.ndarray) -> None:
    h, w = img.shape[:2]
    y0, y1 = max(int(cy - b), 0), min(int(cy + b) + 1, h)
    x0, x1 = max(int(cx - a), 0), min(int(cx + a) + 1, w)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.mgrid[y0:y1, x0:x1]
    mask = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
    img[y0:y1, x0:x1][mask] = color


def _target_texture(rng: np.random.Generator, w: int, h: int) -> np.ndarray:
    """4x4 grid of saturated color blocks resized to the target size."""
    blocks = rng.integers(0, 256, size=(4, 4, 3), dtype=np.uint8)
    ri = np.minimum(np.arange(h) * 4 // h, 3)
    ci = np.minimum(np.arange(w) * 4 // w, 3)
    return blocks[np.ix_(ri, ci)]


def _background(spec: SceneSpec) -> np.ndarray:
    ramp = (100.0 + 40.0 * np.arange(spec.height) / spec.height).astype(np.uint8)
    return np.repeat(np.repeat(ramp[:, None], spec.width, axis=1)[:, :, None], 3, axis=2)


def _clutter_shapes(spec: SceneSpec, rng: np.random.Generator) -> list[tuple]:
    shapes = []
    for _ in range(spec.clutter):
        kind = "rect" if rng.random() < 0.5 else "ellipse"
        w = int(rng.integers(12, 50))
        h = int(rng.integers(12, 50))
        x = int(rng.integers(0, max(1, spec.width - w)))
        y = int(rng.integers(0, max(1, spec.height - h)))
        color = rng.integers(60, 200, size=3).astype(np.uint8)
        inner = rng.random() < 0.4
        inner_color = rng.integers(60, 200, size=3).astype(np.uint8)
        shapes.append((kind, x, y, w, h, color, inner, inner_color))
    return shapes


def _positions(spec: SceneSpec, rng: np.random.Generator) -> list[tuple[int, int]]:
    lo_x, hi_x = spec.margin, spec.width - spec.target_w - spec.margin
    lo_y, hi_y = spec.margin, spec.height - spec.target_h - spec.margin
    x = int(rng.integers(lo_x, hi_x + 1))
    y = int(rng.integers(lo_y, hi_y + 1))
    pts = [(x, y)]
    if spec.motion == "static":
        return pts * spec.frame_count
    if spec.motion == "smooth":
        angle = rng.random() * 2.0 * math.pi
        vx, vy = spec.speed * math.cos(angle), spec.speed * math.sin(angle)
        fx, fy = float(x), float(y)
        for _ in range(spec.frame_count - 1):
            fx += vx
            fy += vy
            if fx < lo_x or fx > hi_x:
                vx = -vx
                fx = min(max(fx, lo_x), hi_x)
            if fy < lo_y or fy > hi_y:
                vy = -vy
                fy = min(max(fy, lo_y), hi_y)
            pts.append((int(round(fx)), int(round(fy))))
        return pts
    # teleport: fixed-distance jumps in a random feasible direction
    for _ in range(spec.frame_count - 1):
        px, py = pts[-1]
        dist = float(rng.uniform(spec.teleport_min, spec.teleport_max))
        placed = False
        for _ in range(256):
            angle = rng.random() * 2.0 * math.pi
            nx = px + dist * math.cos(angle)
            ny = py + dist * math.sin(angle)
            if lo_x <= nx <= hi_x and lo_y <= ny <= hi_y:
                pts.append((int(round(nx)), int(round(ny))))
                placed = True
                break
        if not placed:
            raise ValueError(
                "teleport distance does not fit the frame; enlarge the frame or shrink the jump"
            )
    return pts


def render_scene(spec: SceneSpec) -> tuple[list[np.ndarray], list[Box]]:
    """Render frames and exact per-frame ground-truth boxes."""
    rng = np.random.default_rng(spec.seed)
    base = _background(spec)
    shapes = _clutter_shapes(spec, rng)
    texture = _target_texture(rng, spec.target_w, spec.target_h)
    positions = _positions(spec, rng)

    frames: list[np.ndarray] = []
    gt: list[Box] = []
    for x, y in positions:
        img = base.copy()
        for kind, sx, sy, sw, sh, color, inner, inner_color in shapes:
            if kind == "rect":
                _draw_rect(img, sx, sy, sw, sh, color)
                if inner:
                    _draw_rect(img, sx + sw // 4, sy + sh // 4, sw // 2, sh // 2, inner_color)
            else:
                _draw_ellipse(img, sx + sw / 2, sy + sh / 2, sw / 2, sh / 2, color)
        img[y : y + spec.target_h, x : x + spec.target_w] = texture
        frames.append(img)
        gt.append(Box(float(x), float(y), float(spec.target_w), float(spec.target_h)))
    return frames, gt
