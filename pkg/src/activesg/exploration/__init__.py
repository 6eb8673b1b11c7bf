from activesg.exploration.completion import CompletionSample, HypothesizedObject, sample_completions
from activesg.exploration.frontier import compute_frontiers, frontier_mask
from activesg.exploration.infogain import info_gain, info_gain_batch
from activesg.exploration.planner import (
    PlannerConfig,
    Selection,
    candidate_viewpoints,
    select_nbv_frontier,
    select_nbv_random,
    select_nbv_semantic,
)
from activesg.exploration.remote import RemoteSampler

__all__ = [
    "CompletionSample",
    "HypothesizedObject",
    "PlannerConfig",
    "RemoteSampler",
    "Selection",
    "candidate_viewpoints",
    "compute_frontiers",
    "frontier_mask",
    "info_gain",
    "info_gain_batch",
    "sample_completions",
    "select_nbv_frontier",
    "select_nbv_random",
    "select_nbv_semantic",
]
