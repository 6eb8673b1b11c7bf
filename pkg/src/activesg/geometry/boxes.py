"""Gravity-aligned oriented boxes and their footprint/volume overlap measures.

Footprints are yaw-rotated rectangles in the ground plane; intersections are
computed exactly by convex polygon clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from activesg.errors import InvalidArgument

MIN_EXTENT = 0.01
_QUARTER = math.pi / 4
_HALF = math.pi / 2

Polygon = list[tuple[float, float]]


def canonical_yaw(yaw: float, extents: Sequence[float]) -> tuple[float, tuple[float, float, float]]:
    """Map a rectangle orientation into [-pi/4, pi/4), swapping x/y extents on quarter turns."""
    ex, ey, ez = (float(e) for e in extents)
    turns = math.floor((yaw + _QUARTER) / _HALF)
    y = yaw - turns * _HALF
    if y >= _QUARTER:  # float slop at the upper edge
        y -= _HALF
        turns += 1
    if turns % 2:
        ex, ey = ey, ex
    return y, (ex, ey, ez)


@dataclass(frozen=True, eq=False)
class OrientedBox:
    center: np.ndarray
    yaw: float
    extents: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=float).reshape(3)
        e = np.asarray(self.extents, dtype=float).reshape(3)
        if not np.all(e > 0):
            raise InvalidArgument("box extents must be positive")
        yaw, ext = canonical_yaw(float(self.yaw), e)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "yaw", yaw)
        object.__setattr__(self, "extents", np.array(ext))

    @property
    def zmin(self) -> float:
        return float(self.center[2] - self.extents[2] / 2)

    @property
    def zmax(self) -> float:
        return float(self.center[2] + self.extents[2] / 2)

    @property
    def height(self) -> float:
        return float(self.extents[2])

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def footprint_area(self) -> float:
        return float(self.extents[0] * self.extents[1])

    def footprint(self) -> Polygon:
        """Counter-clockwise footprint corners."""
        cx, cy = float(self.center[0]), float(self.center[1])
        hx, hy = float(self.extents[0]) / 2, float(self.extents[1]) / 2
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return [
            (cx + c * x - s * y, cy + s * x + c * y)
            for x, y in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy))
        ]

    def footprint_radius(self) -> float:
        return float(math.hypot(self.extents[0], self.extents[1]) / 2)

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 3) - self.center
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        local = np.stack([c * p[:, 0] + s * p[:, 1], -s * p[:, 0] + c * p[:, 1], p[:, 2]], axis=1)
        return np.all(np.abs(local) <= self.extents / 2 + tol, axis=1)

    def translated(self, offset: Sequence[float]) -> OrientedBox:
        return OrientedBox(self.center + np.asarray(offset, dtype=float), self.yaw, self.extents)

    def rotated_about_z(self, angle: float) -> OrientedBox:
        c, s = math.cos(angle), math.sin(angle)
        x, y, z = self.center
        return OrientedBox(np.array([c * x - s * y, s * x + c * y, z]), self.yaw + angle, self.extents)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "yaw": self.yaw, "extents": self.extents.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> OrientedBox:
        return cls(np.asarray(d["center"], dtype=float), float(d.get("yaw", 0.0)), np.asarray(d["extents"], dtype=float))


def _hull_2d(xy: np.ndarray) -> np.ndarray:
    uniq = np.unique(xy, axis=0)
    if len(uniq) >= 3:
        try:
            return uniq[ConvexHull(uniq).vertices]
        except QhullError:
            pass  # collinear
    if len(uniq) <= 2:
        return uniq
    # collinear: keep the two extreme points along the principal direction
    d = uniq[-1] - uniq[0]
    t = uniq @ d
    return uniq[[int(np.argmin(t)), int(np.argmax(t))]]


def fit_oriented_box(points: np.ndarray) -> OrientedBox:
    """Minimum-area-footprint gravity-aligned box enclosing ``points``.

    The footprint orientation is chosen by rotating calipers over the 2D hull:
    the optimal enclosing rectangle is flush with one hull edge.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise InvalidArgument("cannot fit a box to an empty point set")
    hull = _hull_2d(pts[:, :2])
    if len(hull) >= 2:
        edges = np.roll(hull, -1, axis=0) - hull
        angles = np.arctan2(edges[:, 1], edges[:, 0])
        angles = np.mod(angles + _QUARTER, _HALF) - _QUARTER
    else:
        angles = np.zeros(1)

    best = None
    for theta in np.unique(angles):
        c, s = math.cos(theta), math.sin(theta)
        u = hull[:, 0] * c + hull[:, 1] * s
        v = -hull[:, 0] * s + hull[:, 1] * c
        area = (u.max() - u.min()) * (v.max() - v.min())
        key = (area, abs(theta))
        if best is None or key[0] < best[0][0] - 1e-12 or (abs(key[0] - best[0][0]) <= 1e-12 and key[1] < best[0][1]):
            best = (key, theta, u.min(), u.max(), v.min(), v.max())
    _, theta, u0, u1, v0, v1 = best
    c, s = math.cos(theta), math.sin(theta)
    um, vm = (u0 + u1) / 2, (v0 + v1) / 2
    z0, z1 = float(pts[:, 2].min()), float(pts[:, 2].max())
    center = np.array([um * c - vm * s, um * s + vm * c, (z0 + z1) / 2])
    extents = np.maximum([u1 - u0, v1 - v0, z1 - z0], MIN_EXTENT)
    return OrientedBox(center, float(theta), extents)


# --- convex polygon machinery -------------------------------------------------


def polygon_area(poly: Polygon) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    a = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return abs(a) / 2.0


def clip_convex(subject: Polygon, clip: Polygon) -> Polygon:
    """Sutherland-Hodgman clipping of ``subject`` by the CCW convex polygon ``clip``."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        if not out:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp, out = out, []
        m = len(inp)
        for j in range(m):
            px, py = inp[j]
            qx, qy = inp[(j + 1) % m]
            sp = ex * (py - ay) - ey * (px - ax)
            sq = ex * (qy - ay) - ey * (qx - ax)
            if sp >= 0:
                out.append((px, py))
            if (sp >= 0) != (sq >= 0):
                t = sp / (sp - sq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def footprint_intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    if math.dist(a.center[:2], b.center[:2]) > a.footprint_radius() + b.footprint_radius():
        return 0.0
    return polygon_area(clip_convex(a.footprint(), b.footprint()))


def vertical_overlap(a: OrientedBox, b: OrientedBox) -> float:
    return max(0.0, min(a.zmax, b.zmax) - max(a.zmin, b.zmin))


def intersection_volume(a: OrientedBox, b: OrientedBox) -> float:
    dz = vertical_overlap(a, b)
    if dz <= 0.0:
        return 0.0
    return footprint_intersection_area(a, b) * dz


def footprint_overlap(a: OrientedBox, b: OrientedBox) -> float:
    """Footprint intersection area normalised by the smaller footprint."""
    inter = footprint_intersection_area(a, b)
    return min(1.0, max(0.0, inter / min(a.footprint_area, b.footprint_area)))


def box_iou(a: OrientedBox, b: OrientedBox) -> float:
    inter = intersection_volume(a, b)
    if inter <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / (a.volume + b.volume - inter)))


def containment_fraction(a: OrientedBox, b: OrientedBox) -> float:
    """Fraction of ``a``'s volume lying inside ``b``."""
    return min(1.0, intersection_volume(a, b) / a.volume)


def _point_segment_distance(px: float, py: float, a: tuple[float, float], b: tuple[float, float]) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


def footprint_gap(a: OrientedBox, b: OrientedBox) -> float:
    """Minimum distance between two footprint rectangles (0 when they overlap)."""
    pa, pb = a.footprint(), b.footprint()
    if polygon_area(clip_convex(pa, pb)) > 0.0:
        return 0.0
    best = math.inf
    for poly, other in ((pa, pb), (pb, pa)):
        n = len(other)
        for px, py in poly:
            for i in range(n):
                best = min(best, _point_segment_distance(px, py, other[i], other[(i + 1) % n]))
    return best


def footprint_aabb(box: OrientedBox) -> tuple[float, float, float, float]:
    fp = box.footprint()
    xs = [p[0] for p in fp]
    ys = [p[1] for p in fp]
    return min(xs), min(ys), max(xs), max(ys)
