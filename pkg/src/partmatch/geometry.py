"""Oriented rectangles, exact convex-polygon IoU and axis-aligned boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_EPS = 1e-12


@dataclass(frozen=True)
class OrientedRect:
    """Four corners, counterclockwise in a y-up sense (clockwise on screen)."""

    corners: tuple[tuple[float, float], ...]

    @classmethod
    def from_center(cls, cx: float, cy: float, theta: float, width: float, height: float) -> OrientedRect:
        c, s = math.cos(theta), math.sin(theta)
        hw, hh = width / 2.0, height / 2.0
        local = ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))
        pts = tuple((cx + c * u - s * v, cy + s * u + c * v) for u, v in local)
        return cls(_ccw(pts))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.corners, dtype=float)

    @property
    def area(self) -> float:
        return abs(_signed_area(self.corners))

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.corners]
        ys = [p[1] for p in self.corners]
        return (min(xs), min(ys), max(xs), max(ys))

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Vectorized point-in-rectangle test (boundary counts as inside)."""
        inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
        pts = self.corners
        for i in range(4):
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % 4]
            cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
            inside &= cross >= -1e-9
        return inside


def _signed_area(pts) -> float:
    area = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return area / 2.0


def _ccw(pts):
    return tuple(pts) if _signed_area(pts) >= 0 else tuple(reversed(pts))


def polygon_area(pts) -> float:
    return abs(_signed_area(pts)) if len(pts) >= 3 else 0.0


def clip_convex(subject, clipper) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clipping of a convex polygon by a convex ccw polygon."""
    output = list(subject)
    n = len(clipper)
    for i in range(n):
        if not output:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]

        def side(p):
            return (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax)

        inp, output = output, []
        prev = inp[-1]
        sp = side(prev)
        for cur in inp:
            sc = side(cur)
            if sc >= 0:
                if sp < 0:
                    output.append(_intersect(prev, cur, sp, sc))
                output.append(cur)
            elif sp >= 0:
                output.append(_intersect(prev, cur, sp, sc))
            prev, sp = cur, sc
    return output


def _intersect(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def iou(a: OrientedRect, b: OrientedRect) -> float:
    """Intersection-over-union of two oriented rectangles."""
    area_a, area_b = a.area, b.area
    if area_a <= _EPS or area_b <= _EPS:
        return 0.0
    ax0, ay0, ax1, ay1 = a.bounds()
    bx0, by0, bx1, by1 = b.bounds()
    if ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0:
        return 0.0
    inter = polygon_area(clip_convex(a.corners, b.corners))
    union = area_a + area_b - inter
    if union <= _EPS:
        return 0.0
    return min(1.0, max(0.0, inter / union))


Box = tuple[float, float, float, float]


def box_iou(a: Box, b: Box) -> float:
    """IoU of axis-aligned boxes given as (x0, y0, x1, y1)."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def union_box(boxes) -> Box:
    boxes = list(boxes)
    if not boxes:
        raise ValueError("no boxes to enclose")
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


def rotate(u: float, v: float, theta: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    return (c * u - s * v, s * u + c * v)


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t
