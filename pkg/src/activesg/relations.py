"""Geometry-only spatial relations with a fixed predicate priority.

For each ordered node pair the first matching rule wins:
on_top_of, supports, under, over, inside, next_to.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from activesg.errors import InvalidArgument
from activesg.geometry.boxes import (
    OrientedBox,
    containment_fraction,
    footprint_aabb,
    footprint_gap,
    footprint_overlap,
    intersection_volume,
    vertical_overlap,
)
from activesg.scene_model import ObjectNode, RelationEdge, SceneGraph


@dataclass(frozen=True)
class RelationThresholds:
    contact_gap: float = 0.05
    max_vertical_gap: float = 0.50
    min_footprint_overlap: float = 0.30
    inside_fraction: float = 0.80
    near_distance: float = 0.30
    min_height_interval_overlap: float = 0.25
    on_top_containment_cap: float = 0.50

    def __post_init__(self) -> None:
        for name, v in self.__dict__.items():
            if v <= 0:
                raise InvalidArgument(f"{name} must be positive")
        for name in ("min_footprint_overlap", "inside_fraction", "min_height_interval_overlap", "on_top_containment_cap"):
            if getattr(self, name) > 1:
                raise InvalidArgument(f"{name} must be a fraction in (0, 1]")


def _rests_on(a: OrientedBox, b: OrientedBox, th: RelationThresholds) -> bool:
    gap = a.zmin - b.zmax
    return (
        -th.contact_gap <= gap <= th.contact_gap
        and footprint_overlap(a, b) >= th.min_footprint_overlap
        and containment_fraction(a, b) <= th.on_top_containment_cap
    )


def _below(a: OrientedBox, b: OrientedBox, th: RelationThresholds) -> bool:
    if not a.zmax < b.zmin:
        return False
    gap = b.zmin - a.zmax
    return th.contact_gap < gap <= th.max_vertical_gap and footprint_overlap(a, b) >= th.min_footprint_overlap


def predicate_for(a: OrientedBox, b: OrientedBox, th: RelationThresholds) -> str | None:
    if _rests_on(a, b, th):
        return "on_top_of"
    if _rests_on(b, a, th):
        return "supports"
    if _below(a, b, th):
        return "under"
    if _below(b, a, th):
        return "over"
    if intersection_volume(a, b) / a.volume >= th.inside_fraction and a.volume <= b.volume:
        return "inside"
    if footprint_gap(a, b) <= th.near_distance:
        if vertical_overlap(a, b) / min(a.height, b.height) >= th.min_height_interval_overlap:
            return "next_to"
    return None


def evaluate_pair(a: ObjectNode, b: ObjectNode, th: RelationThresholds = RelationThresholds()) -> str | None:
    """Predicate for the ordered pair (a, b), or None."""
    if a.id == b.id:
        raise InvalidArgument("evaluate_pair needs two distinct nodes")
    return predicate_for(a.box, b.box, th)


def _candidate_pairs(nodes: list[ObjectNode], near: float) -> list[tuple[int, int]]:
    # Every rule needs either footprint overlap or a footprint gap <= near, so
    # footprint AABBs further apart than ``near`` can never produce an edge.
    if len(nodes) < 2:
        return []
    bb = np.array([footprint_aabb(n.box) for n in nodes])
    gx = np.maximum(0.0, np.maximum(bb[:, None, 0] - bb[None, :, 2], bb[None, :, 0] - bb[:, None, 2]))
    gy = np.maximum(0.0, np.maximum(bb[:, None, 1] - bb[None, :, 3], bb[None, :, 1] - bb[:, None, 3]))
    close = np.hypot(gx, gy) <= near + 1e-9
    np.fill_diagonal(close, False)
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(close))]


def infer_edges(graph: SceneGraph, th: RelationThresholds = RelationThresholds()) -> SceneGraph:
    """Replace the graph's edges with one predicate per qualifying ordered pair."""
    nodes = graph.sorted_nodes()
    edges = []
    for i, j in _candidate_pairs(nodes, th.near_distance):
        p = evaluate_pair(nodes[i], nodes[j], th)
        if p is not None:
            edges.append(RelationEdge(nodes[i].id, nodes[j].id, p))
    graph.set_edges(edges)
    return graph
