from __future__ import annotations

import numpy as np

from activesg.geometry.voxels import FREE, UNKNOWN, VoxelGrid


def frontier_mask(grid: VoxelGrid) -> np.ndarray:
    """Boolean grid: free voxels with at least one 6-neighbour that is unknown."""
    unknown = grid.cells == UNKNOWN
    near = np.zeros_like(unknown)
    near[1:] |= unknown[:-1]
    near[:-1] |= unknown[1:]
    near[:, 1:] |= unknown[:, :-1]
    near[:, :-1] |= unknown[:, 1:]
    near[:, :, 1:] |= unknown[:, :, :-1]
    near[:, :, :-1] |= unknown[:, :, 1:]
    return (grid.cells == FREE) & near


def compute_frontiers(grid: VoxelGrid) -> set[tuple[int, int, int]]:
    return {tuple(int(v) for v in ijk) for ijk in np.argwhere(frontier_mask(grid))}
