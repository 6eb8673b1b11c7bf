from __future__ import annotations

from typing import Sequence

import numpy as np

from activesg.errors import InvalidArgument
from activesg.geometry import _kernels
from activesg.geometry._kernels import FREE, OCCUPIED, UNKNOWN
from activesg.geometry.camera import CameraModel
from activesg.geometry.pose import Pose

__all__ = [
    "UNKNOWN",
    "FREE",
    "OCCUPIED",
    "VoxelGrid",
    "integrate_scan",
    "visible_cells",
    "visible_voxels",
    "score_poses",
]


class VoxelGrid:
    """Dense tri-state occupancy grid (unknown / free / occupied)."""

    def __init__(
        self,
        origin: Sequence[float],
        dims: Sequence[int],
        resolution: float = 0.10,
        cells: np.ndarray | None = None,
    ) -> None:
        if resolution <= 0:
            raise InvalidArgument("resolution must be positive")
        self.origin = np.asarray(origin, dtype=float).reshape(3)
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) != 3 or min(self.dims) <= 0:
            raise InvalidArgument("dims must be three positive integers")
        self.resolution = float(resolution)
        if cells is None:
            cells = np.zeros(self.dims, dtype=np.int8)
        elif cells.shape != self.dims:
            raise InvalidArgument("cells shape does not match dims")
        self.cells = cells

    @classmethod
    def covering(cls, lo: Sequence[float], hi: Sequence[float], resolution: float = 0.10, pad: float = 0.05) -> VoxelGrid:
        lo = np.asarray(lo, dtype=float) - pad
        hi = np.asarray(hi, dtype=float) + pad
        dims = np.ceil((hi - lo) / resolution - 1e-9).astype(int)
        return cls(lo, dims, resolution)

    def copy(self) -> VoxelGrid:
        return VoxelGrid(self.origin, self.dims, self.resolution, self.cells.copy())

    @property
    def num_voxels(self) -> int:
        return int(np.prod(self.dims))

    @property
    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.dims) * self.resolution

    def to_voxel_coords(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float).reshape(-1, 3) - self.origin) / self.resolution

    def index_of(self, points: np.ndarray) -> np.ndarray:
        return np.floor(self.to_voxel_coords(points)).astype(np.int64)

    def contains_point(self, point: Sequence[float]) -> bool:
        idx = self.index_of(np.asarray(point))[0]
        return bool(np.all(idx >= 0) and np.all(idx < self.dims))

    def center_of(self, ijk: np.ndarray) -> np.ndarray:
        return self.origin + (np.asarray(ijk, dtype=float) + 0.5) * self.resolution

    def flat(self, ijk: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(np.asarray(ijk).T, self.dims)

    def unflat(self, flat: np.ndarray) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.dims), axis=-1)

    def state_at(self, point: Sequence[float]) -> int:
        if not self.contains_point(point):
            return UNKNOWN
        i, j, k = self.index_of(np.asarray(point))[0]
        return int(self.cells[i, j, k])

    def counts(self) -> dict[str, int]:
        return {
            "unknown": int(np.count_nonzero(self.cells == UNKNOWN)),
            "free": int(np.count_nonzero(self.cells == FREE)),
            "occupied": int(np.count_nonzero(self.cells == OCCUPIED)),
        }


def integrate_scan(grid: VoxelGrid, sensor_origin: Sequence[float], points: np.ndarray) -> VoxelGrid:
    """Carve free space along each sensor->point ray and mark the end voxels occupied.

    Mutates ``grid`` in place (single writer) and returns it. Points outside the
    grid are clipped to the boundary voxel layer.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return grid
    hi = np.asarray(grid.dims, dtype=float) - 1e-9
    start = np.clip(grid.to_voxel_coords(np.asarray(sensor_origin))[0], 0.0, hi)
    ends = np.clip(grid.to_voxel_coords(pts), 0.0, hi)
    _kernels.integrate_points(grid.cells, start, np.ascontiguousarray(ends))
    return grid


def _check_pose(grid: VoxelGrid, pose: Pose) -> np.ndarray:
    if not grid.contains_point(pose.translation):
        raise InvalidArgument("pose lies outside the voxel grid")
    return grid.to_voxel_coords(pose.translation)[0]


def visible_voxels(
    grid: VoxelGrid,
    pose: Pose,
    camera: CameraModel,
    occupancy: np.ndarray | None = None,
) -> np.ndarray:
    """Flat indices of voxels reached by the camera's rays, first-touch order.

    Rays stop after the first occupied voxel (inclusive); unknown voxels are transparent.
    """
    origin = _check_pose(grid, pose)
    states = grid.cells if occupancy is None else occupancy
    occ = (states.reshape(-1) == OCCUPIED).astype(np.int64)
    tlim = camera.max_range / grid.resolution
    dirs = np.ascontiguousarray(camera.ray_directions())
    cap = _kernels.touched_capacity(len(dirs), tlim, grid.num_voxels)
    idx, _ = _kernels.cast_from(
        occ, np.int64(1), np.asarray(grid.dims, dtype=np.int64), origin, pose.rotation, dirs, tlim, cap
    )
    return idx


def visible_cells(
    grid: VoxelGrid,
    pose: Pose,
    camera: CameraModel,
    occupancy_override: np.ndarray | None = None,
) -> set[tuple[tuple[int, int, int], int]]:
    """Set of ``((i, j, k), state)`` for every voxel the camera would observe.

    ``occupancy_override`` (full-grid state array) replaces the grid's states,
    e.g. a completion sample's hypothesised occupancy.
    """
    states = grid.cells if occupancy_override is None else occupancy_override
    if states.shape != grid.dims:
        raise InvalidArgument("occupancy_override shape does not match the grid")
    idx = visible_voxels(grid, pose, camera, states)
    flat_states = states.reshape(-1)[idx]
    ijk = grid.unflat(idx)
    return {((int(a), int(b), int(c)), int(s)) for (a, b, c), s in zip(ijk, flat_states)}


def score_poses(
    grid: VoxelGrid,
    positions: np.ndarray,
    rotations: np.ndarray,
    camera: CameraModel,
    occ_bits: np.ndarray,
    full_mask: int,
    weights: np.ndarray,
) -> np.ndarray:
    """Per-pose sum of ``weights`` over voxels reached under every occupancy hypothesis.

    ``occ_bits`` holds, per flat voxel, a bitmask of the hypotheses in which the
    voxel blocks rays; a voxel counts only if it is reached under all bits in
    ``full_mask``. With a single hypothesis this is plain visibility scoring.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(positions) == 0:
        return np.zeros(0)
    origins = np.ascontiguousarray(grid.to_voxel_coords(positions))
    tlim = camera.max_range / grid.resolution
    dirs = np.ascontiguousarray(camera.ray_directions())
    cap = _kernels.touched_capacity(len(dirs), tlim, grid.num_voxels)
    return _kernels.score_poses(
        np.ascontiguousarray(occ_bits, dtype=np.int64),
        np.int64(full_mask),
        np.ascontiguousarray(weights, dtype=float),
        np.asarray(grid.dims, dtype=np.int64),
        origins,
        np.ascontiguousarray(rotations, dtype=float),
        dirs,
        tlim,
        cap,
    )
