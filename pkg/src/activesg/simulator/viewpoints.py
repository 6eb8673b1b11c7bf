from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from activesg.errors import InvalidArgument, SceneUnnavigable
from activesg.geometry.boxes import OrientedBox, footprint_gap
from activesg.geometry.pose import Pose
from activesg.simulator.scenes import SceneSpec

SENSOR_HEIGHT = 1.2
SENSOR_PITCH = math.radians(15.0)
ROBOT_RADIUS = 0.2
EXTERNAL_HEIGHT = 2.5
EXTERNAL_PITCH = math.radians(60.0)


@dataclass(eq=False)
class ViewpointSet:
    positions: np.ndarray  # (n, 3)
    yaws: np.ndarray  # (n,)
    pitch: float = SENSOR_PITCH

    def __len__(self) -> int:
        return len(self.yaws)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    def pose(self, vid: int) -> Pose:
        return Pose.look(self.positions[vid], float(self.yaws[vid]), self.pitch)

    @property
    def poses(self) -> list[Pose]:
        return [self.pose(i) for i in range(len(self))]

    def rotations(self, ids: np.ndarray | None = None) -> np.ndarray:
        ids = self.ids if ids is None else ids
        return np.stack([self.pose(int(i)).rotation for i in ids]) if len(ids) else np.zeros((0, 3, 3))


def _obstacles(scene: SceneSpec) -> list[OrientedBox]:
    return [w.as_box() for w in scene.walls] + [o.box for o in scene.objects]


def navigable_viewpoints(
    scene: SceneSpec,
    spacing: float = 0.5,
    headings: int = 8,
    clearance: float = ROBOT_RADIUS,
    height: float = SENSOR_HEIGHT,
) -> ViewpointSet:
    """Grid of sensor poses whose robot footprint clears every wall and object.

    Ordered by (x, y, heading); the position in that order is the viewpoint id.
    """
    if spacing <= 0:
        raise InvalidArgument("spacing must be positive")
    (x0, y0, _), (x1, y1, _) = scene.bounds
    xs = x0 + spacing * np.arange(int(math.floor((x1 - x0) / spacing + 1e-9)) + 1)
    ys = y0 + spacing * np.arange(int(math.floor((y1 - y0) / spacing + 1e-9)) + 1)
    obstacles = _obstacles(scene)
    radius = np.array([b.footprint_radius() for b in obstacles])
    centers = np.array([b.center[:2] for b in obstacles]) if obstacles else np.zeros((0, 2))
    free = []
    for x in xs:
        for y in ys:
            if x - clearance < x0 or x + clearance > x1 or y - clearance < y0 or y + clearance > y1:
                continue
            probe = OrientedBox(np.array([x, y, height / 2]), 0.0, np.array([1e-3, 1e-3, height]))
            near = np.flatnonzero(np.hypot(*(centers - [x, y]).T) <= radius + clearance + 1e-9)
            if any(footprint_gap(probe, obstacles[k]) < clearance for k in near):
                continue
            free.append((x, y))
    if not free:
        raise SceneUnnavigable(f"scene {scene.name!r} has no navigable viewpoint")
    yaw_set = 2 * math.pi * np.arange(headings) / headings
    positions = np.array([[x, y, height] for x, y in free for _ in range(headings)])
    yaws = np.tile(yaw_set, len(free))
    return ViewpointSet(positions, yaws)


def overhead_cameras(scene: SceneSpec, count: int = 3) -> list[Pose]:
    """Corner-mounted cameras in the largest room, aimed at the room centre and tilted down.

    Order: one corner, the diagonally opposite corner, then the remaining ones.
    """
    room = max(scene.rooms, key=lambda r: r.area) if scene.rooms else None
    if room is None:
        (x0, y0, _), (x1, y1, _) = scene.bounds
    else:
        x0, y0, x1, y1 = room.footprint
    inset = 0.3
    corners = [(x0 + inset, y0 + inset), (x1 - inset, y1 - inset), (x1 - inset, y0 + inset), (x0 + inset, y1 - inset)]
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    out = []
    for px, py in corners[:count]:
        yaw = math.atan2(cy - py, cx - px)
        out.append(Pose.look([px, py, EXTERNAL_HEIGHT], yaw, EXTERNAL_PITCH))
    return out
