"""Synthetic ground-truth scenes: seeded procedural apartments and furnished rooms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from activesg._jsonio import load_json
from activesg.errors import GenerationFailure, InvalidArgument, SceneError
from activesg.geometry.boxes import OrientedBox, footprint_gap, intersection_volume
from activesg.priors import FORMAT_VERSION, Priors, default_priors, default_vocabulary

TEMPLATES = ("apartment", "furnished_room")
WALL_THICKNESS = 0.10
CEILING_HEIGHT = 2.8
DOOR_WIDTH = 1.0


@dataclass(frozen=True)
class SceneObject:
    label: str
    box: OrientedBox


@dataclass(frozen=True)
class Room:
    room_type: str
    footprint: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.footprint
        return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class Wall:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def as_box(self) -> OrientedBox:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return OrientedBox((lo + hi) / 2, 0.0, hi - lo)


@dataclass(eq=False)
class SceneSpec:
    name: str
    bounds: tuple[tuple[float, float, float], tuple[float, float, float]]
    objects: list[SceneObject]
    rooms: list[Room] = field(default_factory=list)
    walls: list[Wall] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.objects:
            raise InvalidArgument("scene must contain at least one object")
        vocab = set(default_vocabulary())
        lo, hi = np.asarray(self.bounds[0]), np.asarray(self.bounds[1])
        for obj in self.objects:
            if obj.label not in vocab:
                raise InvalidArgument(f"label {obj.label!r} is not in the canonical vocabulary")
            corners = np.array(obj.box.footprint())
            if (
                np.any(corners.min(axis=0) < lo[:2] - 1e-6)
                or np.any(corners.max(axis=0) > hi[:2] + 1e-6)
                or obj.box.zmin < lo[2] - 1e-6
                or obj.box.zmax > hi[2] + 1e-6
            ):
                raise InvalidArgument(f"object {obj.label!r} lies outside the scene bounds")

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.objects]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "bounds": {"min": list(self.bounds[0]), "max": list(self.bounds[1])},
            "objects": [{"label": o.label, "box": o.box.to_dict()} for o in self.objects],
            "rooms": [
                {"room_type": r.room_type, "footprint": {"min": list(r.footprint[:2]), "max": list(r.footprint[2:])}}
                for r in self.rooms
            ],
            "walls": [{"min": list(w.lo), "max": list(w.hi)} for w in self.walls],
        }

    @classmethod
    def from_dict(cls, d: dict) -> SceneSpec:
        if d.get("format_version") != FORMAT_VERSION:
            raise SceneError(f"unsupported scene format_version {d.get('format_version')!r}")
        return cls(
            name=str(d["name"]),
            bounds=(tuple(map(float, d["bounds"]["min"])), tuple(map(float, d["bounds"]["max"]))),
            objects=[SceneObject(o["label"], OrientedBox.from_dict(o["box"])) for o in d["objects"]],
            rooms=[
                Room(r["room_type"], tuple(map(float, r["footprint"]["min"] + r["footprint"]["max"])))
                for r in d.get("rooms", [])
            ],
            walls=[Wall(tuple(map(float, w["min"])), tuple(map(float, w["max"]))) for w in d.get("walls", [])],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> SceneSpec:
        raw = load_json(path, SceneError)
        try:
            return cls.from_dict(raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"{path}: malformed scene ({exc!r})") from exc


# --- procedural generation ------------------------------------------------------


class _Placer:
    """Rejection-sampling placement with a running list of placed boxes."""

    def __init__(self, priors: Priors, rng: np.random.Generator) -> None:
        self.priors = priors
        self.rng = rng
        self.objects: list[SceneObject] = []
        self.floor_boxes: list[OrientedBox] = []
        self.items_on: dict[int, list[OrientedBox]] = {}
        self.keepout: list[OrientedBox] = []

    def _size(self, label: str, jitter: float = 0.12) -> np.ndarray:
        base = np.asarray(self.priors.catalog[label].size)
        return base * self.rng.uniform(1 - jitter, 1 + jitter, 3)

    def place_floor(self, label: str, room: Room, walls: list[OrientedBox], tries: int = 60) -> int | None:
        size = self._size(label)
        x0, y0, x1, y1 = room.footprint
        for _ in range(tries):
            yaw = self.rng.integers(4) * (math.pi / 2) + self.rng.uniform(-0.3, 0.3)
            r = math.hypot(size[0], size[1]) / 2
            if x1 - x0 < 2 * r * 0.6 or y1 - y0 < 2 * r * 0.6:
                return None
            cx = self.rng.uniform(x0, x1)
            cy = self.rng.uniform(y0, y1)
            box = OrientedBox(np.array([cx, cy, size[2] / 2]), yaw, size)
            fp = np.array(box.footprint())
            if fp[:, 0].min() < x0 + 0.02 or fp[:, 0].max() > x1 - 0.02:
                continue
            if fp[:, 1].min() < y0 + 0.02 or fp[:, 1].max() > y1 - 0.02:
                continue
            if any(footprint_gap(box, b) < 0.05 for b in self.floor_boxes):
                continue
            if any(footprint_gap(box, b) < 0.01 for b in self.keepout):
                continue
            self.floor_boxes.append(box)
            self.objects.append(SceneObject(label, box))
            return len(self.objects) - 1
        return None

    def place_on(self, label: str, support_index: int, tries: int = 25) -> bool:
        support = self.objects[support_index].box
        size = self._size(label, 0.08)
        if size[0] > support.extents[0] * 0.95 or size[1] > support.extents[1] * 0.95:
            size[:2] = np.minimum(size[:2], support.extents[:2] * 0.9)
        others = self.items_on.setdefault(support_index, [])
        c, s = math.cos(support.yaw), math.sin(support.yaw)
        for _ in range(tries):
            u = self.rng.uniform(-1, 1) * (support.extents[0] - size[0]) / 2
            v = self.rng.uniform(-1, 1) * (support.extents[1] - size[1]) / 2
            center = np.array(
                [support.center[0] + c * u - s * v, support.center[1] + s * u + c * v, support.zmax + size[2] / 2]
            )
            box = OrientedBox(center, support.yaw, size)
            if not support.contains(np.column_stack([np.array(box.footprint()), np.full(4, support.zmax)]), 1e-6).all():
                continue
            if any(footprint_gap(box, b) < 0.02 for b in others):
                continue
            others.append(box)
            self.objects.append(SceneObject(label, box))
            return True
        return False

    def place_inside(self, label: str, container_index: int) -> bool:
        cont = self.objects[container_index].box
        inner = cont.extents - np.array([0.08, 0.08, 0.04])
        size = np.minimum(self._size(label, 0.08), inner * np.array([0.9, 0.9, 0.8]))
        if np.any(size <= 0.02):
            return False
        center = cont.center.copy()
        center[2] = cont.zmin + 0.02 + size[2] / 2
        self.objects.append(SceneObject(label, OrientedBox(center, cont.yaw, size)))
        return True


def _outer_walls(w: float, d: float, h: float) -> list[Wall]:
    t = WALL_THICKNESS
    return [
        Wall((0.0, 0.0, 0.0), (w, t, h)),
        Wall((0.0, d - t, 0.0), (w, d, h)),
        Wall((0.0, t, 0.0), (t, d - t, h)),
        Wall((w - t, t, 0.0), (w, d - t, h)),
    ]


def _wall_with_door(axis: int, at: float, lo: float, hi: float, door: float, h: float) -> list[Wall]:
    """Interior wall along ``axis`` (0: runs along x, 1: runs along y) with one door gap at ``door``."""
    t2 = WALL_THICKNESS / 2
    segs = [(lo, door - DOOR_WIDTH / 2), (door + DOOR_WIDTH / 2, hi)]
    out = []
    for a, b in segs:
        if b - a <= 1e-6:
            continue
        if axis == 0:
            out.append(Wall((a, at - t2, 0.0), (b, at + t2, h)))
        else:
            out.append(Wall((at - t2, a, 0.0), (at + t2, b, h)))
    return out


def _door_keepout(axis: int, at: float, door: float) -> OrientedBox:
    if axis == 0:
        return OrientedBox(np.array([door, at, 1.0]), 0.0, np.array([DOOR_WIDTH, 1.4, 2.0]))
    return OrientedBox(np.array([at, door, 1.0]), 0.0, np.array([1.4, DOOR_WIDTH, 2.0]))


def _weighted_choice(rng: np.random.Generator, labels: list[str], weights: list[float]) -> str:
    p = np.asarray(weights, dtype=float)
    return labels[int(rng.choice(len(labels), p=p / p.sum()))]


def _apartment_layout(rng: np.random.Generator):
    w = float(rng.uniform(10.0, 12.0))
    d = float(rng.uniform(8.0, 9.5))
    h = CEILING_HEIGHT
    t = WALL_THICKNESS
    n_rooms = int(rng.integers(3, 5))
    xa = float(w * rng.uniform(0.45, 0.55))
    yl = float(d * rng.uniform(0.4, 0.6))
    walls = _outer_walls(w, d, h)
    keepout = []
    door_v = [float(rng.uniform(t + 0.8, yl - 0.8)), float(rng.uniform(yl + 0.8, d - t - 0.8))]
    # vertical wall at xa with a door into each left room
    mid = yl
    walls += _wall_with_door(1, xa, t, mid, door_v[0], h)
    walls += _wall_with_door(1, xa, mid, d - t, door_v[1], h)
    keepout += [_door_keepout(1, xa, door_v[0]), _door_keepout(1, xa, door_v[1])]
    door_l = float(rng.uniform(t + 0.8, xa - 0.8))
    walls += _wall_with_door(0, yl, t, xa - WALL_THICKNESS / 2, door_l, h)
    keepout.append(_door_keepout(0, yl, door_l))
    rects = [(t, t, xa - t / 2, yl - t / 2), (t, yl + t / 2, xa - t / 2, d - t)]
    if n_rooms == 4:
        yr = float(d * rng.uniform(0.4, 0.6))
        door_r = float(rng.uniform(xa + 0.8, w - t - 0.8))
        walls += _wall_with_door(0, yr, xa + WALL_THICKNESS / 2, w - t, door_r, h)
        keepout.append(_door_keepout(0, yr, door_r))
        rects += [(xa + t / 2, t, w - t, yr - t / 2), (xa + t / 2, yr + t / 2, w - t, d - t)]
    else:
        rects.append((xa + t / 2, t, w - t, d - t))
    order = sorted(range(len(rects)), key=lambda i: -(rects[i][2] - rects[i][0]) * (rects[i][3] - rects[i][1]))
    types = ["living_room", "kitchen", "bedroom", str(rng.choice(["bathroom", "office"]))]
    rooms = [None] * len(rects)
    for rank, idx in enumerate(order):
        rooms[idx] = Room(types[rank], rects[idx])
    return (w, d, h), walls, rooms, keepout


def _populate(placer: _Placer, rooms: list[Room], walls: list[Wall], target: int, floor_share: float) -> None:
    priors, rng = placer.priors, placer.rng
    wall_boxes = [wl.as_box() for wl in walls]
    total_area = sum(r.area for r in rooms)
    floor_quota = {i: max(3, round(target * floor_share * r.area / total_area)) for i, r in enumerate(rooms)}
    supports: dict[int, list[int]] = {i: [] for i in range(len(rooms))}
    containers: dict[int, list[int]] = {i: [] for i in range(len(rooms))}
    for i, room in enumerate(rooms):
        labels, weights = priors.floor_labels(room.room_type)
        failures = 0
        placed = 0
        while placed < floor_quota[i] and failures < 12 and len(placer.objects) < target:
            label = _weighted_choice(rng, labels, weights)
            idx = placer.place_floor(label, room, wall_boxes)
            if idx is None:
                failures += 1
                continue
            placed += 1
            info = priors.catalog[label]
            if info.support_surface:
                supports[i].append(idx)
            if info.shape == "open_top":
                containers[i].append(idx)
    # small items on supports and inside containers, room by room in rotation
    stalls = 0
    while len(placer.objects) < target and stalls < 200:
        i = int(rng.integers(len(rooms)))
        weights_all = priors.room_types[rooms[i].room_type].label_weights
        if containers[i] and rng.random() < 0.2:
            cont = containers[i][int(rng.integers(len(containers[i])))]
            cand = sorted(k for k in weights_all if priors.catalog[k].placement == "contained")
            if cand and placer.place_inside(_weighted_choice(rng, cand, [weights_all[k] for k in cand]), cont):
                containers[i].remove(cont)  # one item per container keeps boxes disjoint
                stalls = 0
                continue
        if not supports[i]:
            stalls += 1
            continue
        cand = sorted(k for k in weights_all if priors.catalog[k].placement == "support")
        sup = supports[i][int(rng.integers(len(supports[i])))]
        if placer.place_on(_weighted_choice(rng, cand, [weights_all[k] for k in cand]), sup):
            stalls = 0
        else:
            stalls += 1


def _check_interpenetration(objects: list[SceneObject], priors: Priors) -> bool:
    boxes = [o.box for o in objects]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[j]
            if np.hypot(*(a.center[:2] - b.center[:2])) > a.footprint_radius() + b.footprint_radius():
                continue
            # content of an open-top container sits inside it by construction
            shapes = (priors.catalog[objects[i].label].shape, priors.catalog[objects[j].label].shape)
            if "open_top" in shapes:
                continue
            inter = intersection_volume(a, b)
            if inter <= 0:
                continue
            # allow at most 1 cm of penetration along the thinnest direction
            if inter > 0.01 * min(a.footprint_area, b.footprint_area):
                return False
    return True


def generate_scene(template: str, seed: int, priors: Priors | None = None, max_attempts: int = 20) -> SceneSpec:
    """Seeded procedural scene; deterministic per ``(template, seed)``."""
    if template not in TEMPLATES:
        raise InvalidArgument(f"unknown template {template!r}; expected one of {TEMPLATES}")
    priors = priors or default_priors()
    for attempt in range(max_attempts):
        rng = np.random.default_rng([int(seed), TEMPLATES.index(template), attempt])
        if template == "apartment":
            (w, d, h), walls, rooms, keepout = _apartment_layout(rng)
            lo_n, hi_n, floor_share = 100, 130, 0.42
        else:
            w, d, h = float(rng.uniform(6.5, 7.5)), float(rng.uniform(5.5, 6.5)), CEILING_HEIGHT
            walls = _outer_walls(w, d, h)
            t = WALL_THICKNESS
            rooms = [Room(str(rng.choice(["living_room", "bedroom", "office", "kitchen"])), (t, t, w - t, d - t))]
            keepout = []
            lo_n, hi_n, floor_share = 20, 30, 1.0
        target = int(rng.integers(lo_n, hi_n + 1))
        placer = _Placer(priors, rng)
        placer.keepout = keepout
        if template == "furnished_room":
            # larger furniture only: draw from every room type's floor labels
            labels = sorted({k for k, v in priors.catalog.items() if v.placement == "floor"})
            failures = 0
            while len(placer.objects) < target and failures < 400:
                mix = priors.floor_labels(rooms[0].room_type)
                label = _weighted_choice(rng, *mix) if rng.random() < 0.7 else labels[int(rng.integers(len(labels)))]
                if placer.place_floor(label, rooms[0], [], tries=40) is None:
                    failures += 1
        else:
            _populate(placer, rooms, walls, target, floor_share)
        if lo_n <= len(placer.objects) <= hi_n and _check_interpenetration(placer.objects, priors):
            return SceneSpec(
                name=f"{template}_{seed}",
                bounds=((0.0, 0.0, 0.0), (w, d, h)),
                objects=placer.objects,
                rooms=rooms,
                walls=walls,
            )
    raise GenerationFailure(f"could not place {template} scene for seed {seed}; re-seed")
