"""Prior-driven sampling of plausible completions of the unobserved scene.

Unknown space near the floor is split into connected components. For each
component a room type is drawn from a naive-Bayes posterior given the labels
already in the graph, then furniture is drawn from that room's label
distribution and dropped into unknown voxels by rejection sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from activesg.errors import ConfigurationError, InvalidArgument
from activesg.geometry.boxes import OrientedBox
from activesg.geometry.voxels import FREE, OCCUPIED, UNKNOWN, VoxelGrid
from activesg.priors import Priors, default_vocabulary
from activesg.scene_model import SceneGraph

PLACEMENT_BAND = 2.0  # metres above the floor searched for unknown components
MIN_COMPONENT_FLOOR_CELLS = 4
MAX_AREA_FACTOR = 3.0
PLACEMENT_TRIES = 20


@dataclass(frozen=True)
class HypothesizedObject:
    label: str
    box: OrientedBox


@dataclass(eq=False)
class CompletionSample:
    hypothesized_objects: list[HypothesizedObject]
    derived_occupancy: np.ndarray
    voxel_labels: np.ndarray  # 0 = no hypothesised object, else vocabulary index + 1
    room_types: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class UnknownComponent:
    index: int
    floor_cells: np.ndarray  # (n, 2) voxel (i, j) columns touching the floor band
    voxel_count: int
    bbox_lo: np.ndarray
    bbox_hi: np.ndarray

    def to_dict(self) -> dict:
        return {"bbox": {"min": self.bbox_lo.tolist(), "max": self.bbox_hi.tolist()}, "voxel_count": self.voxel_count}


def label_index() -> dict[str, int]:
    return {lab: i + 1 for i, lab in enumerate(default_vocabulary())}


def unknown_components(grid: VoxelGrid, floor_z: float) -> list[UnknownComponent]:
    """Six-connected unknown components inside the placement band above the floor."""
    res = grid.resolution
    k0 = max(0, int(math.floor((floor_z - grid.origin[2]) / res)))
    k1 = min(grid.dims[2], int(math.ceil((floor_z + PLACEMENT_BAND - grid.origin[2]) / res)))
    band = grid.cells[:, :, k0:k1] == UNKNOWN
    labels, n = ndimage.label(band)
    if n == 0:
        return []
    floor_layers = labels[:, :, :2]
    out = []
    slices = ndimage.find_objects(labels)
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    for c in range(1, n + 1):
        cols = np.argwhere((floor_layers == c).any(axis=2))
        if len(cols) < MIN_COMPONENT_FLOOR_CELLS:
            continue
        sl = slices[c - 1]
        lo = grid.origin + np.array([sl[0].start, sl[1].start, sl[2].start + k0]) * res
        hi = grid.origin + np.array([sl[0].stop, sl[1].stop, sl[2].stop + k0]) * res
        out.append(UnknownComponent(len(out), cols, int(counts[c]), lo, hi))
    return out


def _voxel_range(grid: VoxelGrid, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.floor((lo - grid.origin) / grid.resolution + 1e-9).astype(int)
    b = np.ceil((hi - grid.origin) / grid.resolution - 1e-9).astype(int)
    return a, b  # half-open voxel index range overlapped by [lo, hi]


def _box_aabb(box: OrientedBox) -> tuple[np.ndarray, np.ndarray]:
    fp = np.array(box.footprint())
    return np.r_[fp.min(axis=0), box.zmin], np.r_[fp.max(axis=0), box.zmax]


class _SampleCanvas:
    """Hypothesised objects of one sample plus the voxels still free to receive one."""

    def __init__(self, grid: VoxelGrid) -> None:
        self.grid = grid
        self.avail = grid.cells == UNKNOWN
        self.labels = np.zeros(grid.dims, dtype=np.int16)
        self.objects: list[HypothesizedObject] = []
        self._runs: dict[int, np.ndarray] = {}
        self._blocked: dict[tuple[int, int], np.ndarray] = {}

    def fits(self, box: OrientedBox) -> bool:
        lo, hi = _box_aabb(box)
        a, b = _voxel_range(self.grid, lo, hi)
        if np.any(a < 0) or np.any(b > self.grid.dims) or np.any(b <= a):
            return False
        return bool(self.avail[a[0] : b[0], a[1] : b[1], a[2] : b[2]].all())

    def run_from(self, k: int) -> np.ndarray:
        """Per column, number of consecutive available voxels starting at layer ``k``."""
        if k not in self._runs:
            self._runs[k] = self._column_runs(self.avail[:, :, k:])
        return self._runs[k]

    @staticmethod
    def _column_runs(col: np.ndarray) -> np.ndarray:
        blocked = ~col
        return np.where(blocked.any(axis=2), np.argmax(blocked, axis=2), col.shape[2])

    def blocked_integral(self, k: int, layers: int) -> np.ndarray:
        """Summed-area table of columns lacking ``layers`` free voxels from layer ``k``."""
        key = (k, layers)
        if key not in self._blocked:
            nx, ny, _ = self.grid.dims
            table = np.zeros((nx + 1, ny + 1), dtype=np.int32)
            table[1:, 1:] = (self.run_from(k) < layers).astype(np.int32).cumsum(0).cumsum(1)
            self._blocked[key] = table
        return self._blocked[key]

    def add(self, label: str, code: int, box: OrientedBox) -> None:
        lo, hi = _box_aabb(box)
        a, b = _voxel_range(self.grid, lo, hi)
        self.avail[a[0] : b[0], a[1] : b[1], a[2] : b[2]] = False
        for k, runs in self._runs.items():
            runs[a[0] : b[0], a[1] : b[1]] = self._column_runs(self.avail[a[0] : b[0], a[1] : b[1], k:])
        self._blocked.clear()
        # voxels whose centres fall inside the box carry the hypothesised label
        ii, jj, kk = np.meshgrid(*(np.arange(a[d], b[d]) for d in range(3)), indexing="ij")
        idx = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
        inside = box.contains(self.grid.center_of(idx))
        if not inside.any():
            inside = np.all(idx == np.floor(self.grid.to_voxel_coords(box.center)[0]).astype(int), axis=1)
        sel = idx[inside]
        self.labels[sel[:, 0], sel[:, 1], sel[:, 2]] = code
        self.objects.append(HypothesizedObject(label, box))

    def finish(self, room_types: list[str]) -> CompletionSample:
        occ = self.grid.cells.copy()
        occ[occ == UNKNOWN] = FREE
        occ[self.labels > 0] = OCCUPIED
        return CompletionSample(self.objects, occ, self.labels, room_types)


def _snap_heights(grid: VoxelGrid, floor_z: float) -> tuple[float, ...]:
    # floor plane, then the tops of the next two voxel layers
    base = grid.origin[2] + math.floor((floor_z - grid.origin[2]) / grid.resolution + 1e-9) * grid.resolution
    return (floor_z, base + grid.resolution, base + 2 * grid.resolution)


def _place_first_fit(
    grid: VoxelGrid, canvas: _SampleCanvas, xy: np.ndarray, size: np.ndarray, yaws: np.ndarray, floor_z: float
) -> OrientedBox | None:
    """First (try, snap height) in order whose box lies entirely in available voxels.

    Vectorised equivalent of calling :meth:`_SampleCanvas.fits` on every
    candidate; yaws are multiples of a quarter turn so the AABB is exact.
    """
    res = grid.resolution
    quarter = (np.round(yaws / (math.pi / 2)).astype(int) % 2) == 1
    half = np.where(quarter[:, None], size[[1, 0]], size[[0, 1]]) / 2
    a = np.floor((xy - half - grid.origin[:2]) / res + 1e-9).astype(int)
    b = np.ceil((xy + half - grid.origin[:2]) / res - 1e-9).astype(int)
    nx, ny, nz = grid.dims
    inb = (a[:, 0] >= 0) & (a[:, 1] >= 0) & (b[:, 0] <= nx) & (b[:, 1] <= ny) & np.all(b > a, axis=1)
    a = np.where(inb[:, None], a, 0)
    b = np.where(inb[:, None], b, 1)
    heights = _snap_heights(grid, floor_z)
    ok = np.zeros((len(xy), len(heights)), dtype=bool)
    for h, z in enumerate(heights):
        k0 = int(math.floor((z - grid.origin[2]) / res + 1e-9))
        k1 = int(math.ceil((z + size[2] - grid.origin[2]) / res - 1e-9))
        if k0 < 0 or k1 > nz or k1 <= k0:
            continue
        integral = canvas.blocked_integral(k0, k1 - k0)
        count = integral[b[:, 0], b[:, 1]] - integral[a[:, 0], b[:, 1]] - integral[b[:, 0], a[:, 1]] + integral[a[:, 0], a[:, 1]]
        ok[:, h] = inb & (count == 0)
    hits = np.argwhere(ok)
    if len(hits) == 0:
        return None
    t, h = hits[0]
    return OrientedBox(np.array([xy[t, 0], xy[t, 1], heights[h] + size[2] / 2]), float(yaws[t]), size)


def build_sample(grid: VoxelGrid, objects: list[HypothesizedObject], room_types: list[str] | None = None) -> CompletionSample:
    """Rasterise externally proposed objects, dropping any that touch observed voxels."""
    codes = label_index()
    canvas = _SampleCanvas(grid)
    for obj in objects:
        if obj.label in codes and canvas.fits(obj.box):
            canvas.add(obj.label, codes[obj.label], obj.box)
    return canvas.finish(room_types or [])


def sample_completions(
    graph: SceneGraph,
    grid: VoxelGrid,
    scene_bounds: tuple,
    K: int,
    seed: int,
    priors: Priors | None,
) -> list[CompletionSample]:
    """Draw ``K`` completions; sample ``s`` of component ``c`` uses generator ``(seed, c, s)``."""
    if K < 1:
        raise InvalidArgument("K must be >= 1")
    if priors is None:
        raise ConfigurationError("completion sampling needs a priors table")
    floor_z = float(scene_bounds[0][2])
    comps = unknown_components(grid, floor_z)
    posterior = priors.room_posterior(graph.labels())
    rooms = sorted(posterior)
    probs = np.array([posterior[r] for r in rooms])
    codes = label_index()
    res2 = grid.resolution**2
    samples = []
    for s in range(K):
        canvas = _SampleCanvas(grid)
        chosen_rooms = []
        for comp in comps:
            rng = np.random.default_rng([int(seed), comp.index, s])
            room = rooms[int(rng.choice(len(rooms), p=probs))]
            chosen_rooms.append(room)
            prior = priors.room_types[room]
            lo, hi = prior.count_range
            area_factor = min(MAX_AREA_FACTOR, len(comp.floor_cells) * res2 / prior.nominal_area_m2)
            n = int(round(int(rng.integers(lo, hi + 1)) * area_factor))
            labels, weights = priors.floor_labels(room)
            p = np.asarray(weights) / np.sum(weights)
            for _ in range(n):
                label = labels[int(rng.choice(len(labels), p=p))]
                size = np.asarray(priors.catalog[label].size) * rng.uniform(0.9, 1.1, 3)
                cols = comp.floor_cells[rng.integers(len(comp.floor_cells), size=PLACEMENT_TRIES)]
                xy = grid.origin[:2] + (cols + rng.random((PLACEMENT_TRIES, 2))) * grid.resolution
                yaws = rng.integers(2, size=PLACEMENT_TRIES) * (math.pi / 2)
                box = _place_first_fit(grid, canvas, xy, size, yaws, floor_z)
                if box is not None:
                    canvas.add(label, codes[label], box)
        samples.append(canvas.finish(chosen_rooms))
    return samples
