"""Axis-aligned bounding boxes, overlap measures and local candidate sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Boxes clipped to a frame must keep at least this many pixels per side;
# histogram cells over anything smaller are meaningless.
MIN_BOX_SIDE = 4.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle: top-left corner (x, y), width w, height h.

    Coordinates are continuous; rasterization happens only inside feature
    extraction. w and h must be strictly positive.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def translated(self, dx: float, dy: float) -> "Box":
        return Box(self.x + dx, self.y + dy, self.w, self.h)

    def scaled(self, factor: float) -> "Box":
        return Box(self.x * factor, self.y * factor, self.w * factor, self.h * factor)


@dataclass(frozen=True)
class LocalSampleConfig:
    """Uniform sampling of same-size candidates around an anchor box."""

    radius: float = 30.0
    count: int = 80

    def __post_init__(self) -> None:
        if self.radius <= 0 or self.count <= 0:
            raise ValueError("radius and count must be positive")


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    if a == b:
        return 1.0
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    if ix <= 0:
        return 0.0
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if iy <= 0:
        return 0.0
    inter = ix * iy
    # x2 = x + w reintroduces rounding, so identical boxes can yield a ratio
    # one ulp above 1; clamp to keep the [0, 1] contract exact
    return min(inter / (a.area + b.area - inter), 1.0)


def center(b: Box) -> tuple[float, float]:
    return b.center()


def center_distance(a: Box, b: Box) -> float:
    ax, ay = a.center()
    bx, by = b.center()
    return math.hypot(ax - bx, ay - by)


def sample_local(anchor: Box, cfg: LocalSampleConfig, rng: np.random.Generator) -> list[Box]:
    """Sample cfg.count boxes of the anchor's size with centers uniform in a disc.

    The anchor itself is not included; callers append it when needed.
    Deterministic given the generator state.
    """
    u = rng.random(cfg.count)
    theta = rng.random(cfg.count) * (2.0 * math.pi)
    r = cfg.radius * np.sqrt(u)
    dx = r * np.cos(theta)
    dy = r * np.sin(theta)
    return [anchor.translated(float(dx[i]), float(dy[i])) for i in range(cfg.count)]


def clip_to_frame(b: Box, frame_w: int, frame_h: int) -> Box | None:
    """Intersect a box with the frame; None if the survivor is under 4x4 px."""
    x = max(b.x, 0.0)
    y = max(b.y, 0.0)
    x2 = min(b.x2, float(frame_w))
    y2 = min(b.y2, float(frame_h))
    if x2 - x < MIN_BOX_SIDE or y2 - y < MIN_BOX_SIDE:
        return None
    return Box(x, y, x2 - x, y2 - y)
