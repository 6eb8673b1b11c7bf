"""Next-best-view selection over a fixed set of navigable viewpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from activesg.errors import ExplorationComplete, ExplorationExhausted, InvalidArgument
from activesg.exploration.completion import CompletionSample, sample_completions
from activesg.exploration.frontier import frontier_mask
from activesg.exploration.infogain import info_gain_batch
from activesg.geometry.camera import CameraModel
from activesg.geometry.voxels import FREE, OCCUPIED, VoxelGrid, score_poses
from activesg.priors import Priors
from activesg.scene_model import SceneGraph
from activesg.simulator.viewpoints import ViewpointSet

log = logging.getLogger(__name__)

PLANNERS = ("frontier", "semantic", "random")

Sampler = Callable[[SceneGraph, VoxelGrid, tuple, int, int], list[CompletionSample]]


@dataclass(frozen=True)
class PlannerConfig:
    planner: str = "semantic"
    num_samples: int = 8

    def __post_init__(self) -> None:
        if self.planner not in PLANNERS:
            raise InvalidArgument(f"unknown planner {self.planner!r}; expected one of {PLANNERS}")
        if self.planner == "semantic" and self.num_samples < 2:
            raise InvalidArgument("semantic planner needs num_samples >= 2")
        if self.num_samples < 1:
            raise InvalidArgument("num_samples must be >= 1")


@dataclass
class Selection:
    viewpoint: int
    score: float
    candidates: np.ndarray
    scores: np.ndarray
    info: dict = field(default_factory=dict)

    def log_record(self) -> dict:
        return {
            "selected": self.viewpoint,
            "score": self.score,
            "candidates": self.candidates.tolist(),
            "scores": [float(s) for s in self.scores],
            **self.info,
        }


def candidate_viewpoints(grid: VoxelGrid, viewpoints: ViewpointSet, current: int | None = None) -> np.ndarray:
    """Viewpoint ids whose position voxel is known free, excluding the current one."""
    idx = grid.index_of(viewpoints.positions)
    inside = np.all((idx >= 0) & (idx < np.asarray(grid.dims)), axis=1)
    ok = np.zeros(len(viewpoints), dtype=bool)
    ii = idx[inside]
    ok[inside] = grid.cells[ii[:, 0], ii[:, 1], ii[:, 2]] == FREE
    if current is not None:
        ok[current] = False
    return np.flatnonzero(ok)


def travel_distances(viewpoints: ViewpointSet, ids: np.ndarray, current: int | None) -> np.ndarray:
    if current is None:
        return np.zeros(len(ids))
    return np.linalg.norm(viewpoints.positions[ids] - viewpoints.positions[current], axis=1)


def argmax_tiebreak(scores: np.ndarray, distances: np.ndarray, ids: np.ndarray) -> int:
    """Index of the best score; ties go to the shorter move, then the smaller id."""
    order = np.lexsort((ids, distances, -scores))
    return int(order[0])


def _finish(ids, scores, viewpoints, current, info=None) -> Selection:
    k = argmax_tiebreak(scores, travel_distances(viewpoints, ids, current), ids)
    return Selection(int(ids[k]), float(scores[k]), ids, scores, info or {})


def _require(ids: np.ndarray) -> None:
    if ids.size == 0:
        raise ExplorationExhausted("no candidate viewpoint lies in known free space")


def frontier_scores(grid: VoxelGrid, viewpoints: ViewpointSet, ids: np.ndarray, camera: CameraModel) -> np.ndarray:
    weights = frontier_mask(grid).reshape(-1).astype(float)
    occ = (grid.cells.reshape(-1) == OCCUPIED).astype(np.int64)
    return score_poses(grid, viewpoints.positions[ids], viewpoints.rotations(ids), camera, occ, 1, weights)


def select_nbv_frontier(
    grid: VoxelGrid,
    viewpoints: ViewpointSet,
    camera: CameraModel,
    config: PlannerConfig,
    current: int | None = None,
) -> Selection:
    """Candidate seeing the most frontier voxels."""
    ids = candidate_viewpoints(grid, viewpoints, current)
    _require(ids)
    if not frontier_mask(grid).any():
        raise ExplorationComplete("no frontier voxels remain")
    return _finish(ids, frontier_scores(grid, viewpoints, ids, camera), viewpoints, current)


def select_nbv_semantic(
    graph: SceneGraph,
    grid: VoxelGrid,
    viewpoints: ViewpointSet,
    camera: CameraModel,
    config: PlannerConfig,
    seed: int,
    priors: Priors | None,
    scene_bounds: tuple,
    current: int | None = None,
    sampler: Sampler | None = None,
) -> Selection:
    """Candidate maximising information gain; samples are drawn once and shared."""
    ids = candidate_viewpoints(grid, viewpoints, current)
    _require(ids)
    if sampler is None:
        samples = sample_completions(graph, grid, scene_bounds, config.num_samples, seed, priors)
    else:
        samples = sampler(graph, grid, scene_bounds, config.num_samples, seed)
    scores = info_gain_batch(grid, viewpoints.positions[ids], viewpoints.rotations(ids), samples, camera)
    info = {"hypothesized_per_sample": [len(s.hypothesized_objects) for s in samples]}
    sel = _finish(ids, scores, viewpoints, current, info)
    log.debug("semantic NBV %d (%.3f bits) among %d candidates", sel.viewpoint, sel.score, len(ids))
    return sel


def select_nbv_random(
    grid: VoxelGrid,
    viewpoints: ViewpointSet,
    seed: int,
    current: int | None = None,
) -> Selection:
    ids = candidate_viewpoints(grid, viewpoints, current)
    _require(ids)
    k = int(np.random.default_rng([int(seed), 7]).integers(len(ids)))
    return Selection(int(ids[k]), 0.0, ids, np.zeros(len(ids)))
