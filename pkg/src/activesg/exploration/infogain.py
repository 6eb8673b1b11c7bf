"""Expected semantic information gain of a candidate view.

Each completion sample induces a predicted observation: the hypothesised label
(or free) of every currently-unknown voxel the camera reaches. With
deterministic per-sample rendering the conditional entropy term vanishes and
the gain is the summed entropy of the per-voxel label mixture across samples.
Only voxels reached under every sample enter the sum.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np

from activesg.errors import InvalidArgument
from activesg.exploration.completion import CompletionSample
from activesg.geometry.camera import CameraModel
from activesg.geometry.pose import Pose
from activesg.geometry.voxels import OCCUPIED, UNKNOWN, VoxelGrid, score_poses, visible_voxels

MAX_SAMPLES = 62  # bitmask width of the fused scorer


def entropy_bits(labels: Sequence[int]) -> float:
    n = len(labels)
    return -sum(c / n * math.log2(c / n) for c in Counter(labels).values())


def predicted_observation(x: Pose, sample: CompletionSample, grid: VoxelGrid, camera: CameraModel) -> dict[int, int]:
    """Flat voxel index -> label code (0 = free) over reached, currently-unknown voxels."""
    idx = visible_voxels(grid, x, camera, sample.derived_occupancy)
    idx = idx[grid.cells.reshape(-1)[idx] == UNKNOWN]
    labels = sample.voxel_labels.reshape(-1)[idx]
    return dict(zip(idx.tolist(), labels.tolist()))


def info_gain(x: Pose, samples: Sequence[CompletionSample], grid: VoxelGrid, camera: CameraModel) -> float:
    """Reference estimator: one traversal per sample, explicit set intersection."""
    if len(samples) < 2:
        raise InvalidArgument("information gain needs at least two samples")
    obs = [predicted_observation(x, s, grid, camera) for s in samples]
    common = set(obs[0]).intersection(*obs[1:])
    return float(sum(entropy_bits([o[c] for o in obs]) for c in sorted(common)))


def label_entropy_map(samples: Sequence[CompletionSample]) -> np.ndarray:
    """Per flat voxel, entropy (bits) of the label mixture across samples."""
    labels = np.stack([s.voxel_labels.reshape(-1) for s in samples])
    k = labels.shape[0]
    out = np.zeros(labels.shape[1])
    cols = np.flatnonzero(labels.any(axis=0))
    if cols.size == 0:
        return out
    sub = labels[:, cols]
    counts = (sub[:, None, :] == sub[None, :, :]).sum(axis=1)
    # H = -sum_l p_l log2 p_l = -mean_j log2(count(label_j) / K)
    out[cols] = np.maximum(-np.log2(counts / k).mean(axis=0), 0.0)
    return out


def occupancy_bits(samples: Sequence[CompletionSample]) -> tuple[np.ndarray, int]:
    if len(samples) > MAX_SAMPLES:
        raise InvalidArgument(f"at most {MAX_SAMPLES} samples are supported")
    bits = np.zeros(samples[0].derived_occupancy.size, dtype=np.int64)
    for s, sample in enumerate(samples):
        bits |= (sample.derived_occupancy.reshape(-1) == OCCUPIED).astype(np.int64) << s
    return bits, (1 << len(samples)) - 1


def info_gain_batch(
    grid: VoxelGrid,
    positions: np.ndarray,
    rotations: np.ndarray,
    samples: Sequence[CompletionSample],
    camera: CameraModel,
) -> np.ndarray:
    """Information gain for many poses in one fused traversal per ray.

    Equals :func:`info_gain` for each pose (up to float summation order).
    """
    if len(samples) < 2:
        raise InvalidArgument("information gain needs at least two samples")
    weights = label_entropy_map(samples)
    weights[grid.cells.reshape(-1) != UNKNOWN] = 0.0
    bits, full = occupancy_bits(samples)
    return score_poses(grid, positions, rotations, camera, bits, full, weights)
