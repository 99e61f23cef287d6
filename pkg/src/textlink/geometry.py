"""Text components: rotated rectangles tiling a text instance.

Coordinates are image coordinates (x to the right, y downward). Angles are
measured in the conventional upward-positive sense, i.e. the angle of a
vector ``(vx, vy)`` is ``atan2(-vy, vx)``, so that a vector pointing up the
image has a positive sine.
"""
from dataclasses import dataclass, replace
import math
from typing import Optional, Sequence

import numpy as np

from textlink import kernels

W_MIN = 8.0
W_MAX = 24.0


@dataclass(frozen=True)
class TextComponent:
    x: float
    y: float
    h: float
    w: float
    cos_t: float = 1.0
    sin_t: float = 0.0
    score: float = 1.0
    instance_id: Optional[int] = None

    def __post_init__(self):
        if not (self.h > 0 and self.w > 0):
            raise ValueError(f"component extents must be positive, got h={self.h}, w={self.w}")
        if abs(self.cos_t ** 2 + self.sin_t ** 2 - 1.0) > 1e-6:
            raise ValueError("cos_t^2 + sin_t^2 must equal 1")

    @property
    def theta(self) -> float:
        return normalize_angle(math.atan2(self.sin_t, self.cos_t))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def attributes(self) -> np.ndarray:
        """The geometry vector (x, y, h, w, cos, sin)."""
        return np.array([self.x, self.y, self.h, self.w, self.cos_t, self.sin_t])

    def with_(self, **changes) -> "TextComponent":
        return replace(self, **changes)

    @classmethod
    def from_angle(cls, x, y, h, w, theta, score=1.0, instance_id=None):
        return cls(float(x), float(y), float(h), float(w), math.cos(theta), math.sin(theta),
                   float(score), instance_id)

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "h": self.h, "w": self.w, "cos": self.cos_t,
                "sin": self.sin_t, "score": self.score, "instance_id": self.instance_id}

    @classmethod
    def from_json(cls, d: dict) -> "TextComponent":
        iid = d.get("instance_id")
        return cls(float(d["x"]), float(d["y"]), float(d["h"]), float(d["w"]),
                   float(d["cos"]), float(d["sin"]), float(d.get("score", 1.0)),
                   None if iid is None else int(iid))


@dataclass
class SideChains:
    top: np.ndarray
    bottom: np.ndarray
    vertex_vectors: np.ndarray
    p: float
    swapped: bool


def normalize_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    t = math.fmod(theta, 2 * math.pi)
    if t <= -math.pi:
        t += 2 * math.pi
    elif t > math.pi:
        t -= 2 * math.pi
    return t


def vector_angle(v) -> float:
    return math.atan2(-float(v[1]), float(v[0]))


def width_from_height(h: float, w_min: float = W_MIN, w_max: float = W_MAX) -> float:
    """Component width as a clamped linear function of its height."""
    if not h > 0:
        raise ValueError(f"height must be positive, got {h}")
    if not 0 < w_min <= w_max:
        raise ValueError(f"need 0 < w_min <= w_max, got {w_min}, {w_max}")
    if h <= 2 * w_min:
        return float(w_min)
    if h >= 2 * w_max:
        return float(w_max)
    return h / 2.0


def assign_top_bottom(p1, p2) -> SideChains:
    """Decide which of two side chains is the top one.

    Treats ``p1`` as the tentative top, sums the sines of the angles of the
    vectors ``p1[i] - p2[i]`` and keeps that assignment when the sum is
    non-negative.
    """
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("side chains must be matching (n, 2) point arrays")
    if len(a) < 2:
        raise ValueError("side chains need at least two points")
    v = a - b
    norms = np.hypot(v[:, 0], v[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        sines = np.where(norms > 0, -v[:, 1] / np.where(norms > 0, norms, 1.0), 0.0)
    p = float(np.sum(sines))
    if p >= 0:
        return SideChains(a, b, v, p, False)
    return SideChains(b, a, -v, p, True)


def component_corners(c: TextComponent) -> np.ndarray:
    """Four corners of the component rectangle (positive shoelace order).

    The ``w`` extent lies along the orientation axis and ``h`` across it.
    """
    along = np.array([c.cos_t, -c.sin_t])
    across = np.array([-c.sin_t, -c.cos_t])
    ctr = np.array([c.x, c.y])
    hw, hh = 0.5 * c.w, 0.5 * c.h
    return np.array([
        ctr - hw * along + hh * across,
        ctr + hw * along + hh * across,
        ctr + hw * along - hh * across,
        ctr - hw * along - hh * across,
    ])


def polygon_area(pts) -> float:
    """Absolute shoelace area."""
    p = np.asarray(pts, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def rotated_rect_overlap(a: TextComponent, b: TextComponent) -> float:
    """Intersection-over-union of two component rectangles."""
    return float(kernels.convex_iou(component_corners(a), component_corners(b)))


def corners_array(comps: Sequence[TextComponent]) -> np.ndarray:
    if not comps:
        return np.zeros((0, 4, 2))
    return np.stack([component_corners(c) for c in comps])
