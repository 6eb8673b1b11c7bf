"""Incremental multi-view association of detections into persistent object nodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from activesg.errors import InvalidArgument
from activesg.geometry.boxes import OrientedBox, box_iou, fit_oriented_box
from activesg.geometry.pose import Pose
from activesg.scene_model import Detection, ObjectNode, SceneGraph, cosine_similarity, normalize


@dataclass(frozen=True)
class AssociationThresholds:
    min_cosine: float = 0.75
    min_iou: float = 0.20
    consolidate_iou: float = 0.40
    downsample_leaf: float = 0.05

    def __post_init__(self) -> None:
        if self.downsample_leaf <= 0:
            raise InvalidArgument("downsample_leaf must be positive")
        # min_iou may exceed 1 to disable merging entirely
        for name in ("min_cosine", "consolidate_iou"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise InvalidArgument(f"{name} must lie in (0, 1]")
        if self.min_iou <= 0:
            raise InvalidArgument("min_iou must be positive")


def voxel_downsample(points: np.ndarray, leaf: float) -> np.ndarray:
    """One centroid per occupied ``leaf``-sized cell, in sorted cell order."""
    keys = np.floor(points / leaf).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    out = np.zeros((len(counts), 3))
    np.add.at(out, inverse, points)
    return out / counts[:, None]


def _bounds(box: OrientedBox) -> np.ndarray:
    r = box.footprint_radius()
    return np.array([box.center[0] - r, box.center[1] - r, box.zmin, box.center[0] + r, box.center[1] + r, box.zmax])


def _may_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a[:3] <= b[3:]) and np.all(b[:3] <= a[3:]))


def _merge_into(node: ObjectNode, points: np.ndarray, embedding: np.ndarray, votes: dict[str, int], count: int, leaf: float) -> None:
    if not np.array_equal(node.embedding, embedding):
        node.embedding = normalize(node.embedding * node.detection_count + embedding * count)
    for label, n in votes.items():
        node.label_votes[label] = node.label_votes.get(label, 0) + n
    node.detection_count += count
    node.points = voxel_downsample(np.vstack([node.points, points]), leaf)
    node.box = fit_oriented_box(node.points)


def associate_detections(
    graph: SceneGraph,
    detections: list[Detection],
    camera_global_pose: Pose,
    th: AssociationThresholds = AssociationThresholds(),
) -> tuple[SceneGraph, list[int | str]]:
    """Merge each detection into the best-matching existing node or open a new one.

    A node is a candidate only if it passes both the box-IoU and cosine gates;
    among candidates the highest cosine wins (then higher IoU, then smaller id).
    Nodes created during this call are not candidates for later detections of
    the same frame. Mutates and returns ``graph``.
    """
    assignment: list[int | str] = []
    existing = sorted(graph.nodes)
    node_bounds = {nid: _bounds(graph.nodes[nid].box) for nid in existing}
    for det in detections:
        pts = voxel_downsample(camera_global_pose.apply(det.points_camera), th.downsample_leaf)
        box = fit_oriented_box(pts)
        bb = _bounds(box)
        best = None
        for nid in existing:
            if not _may_overlap(bb, node_bounds[nid]):
                continue
            node = graph.nodes[nid]
            cos = cosine_similarity(det.embedding, node.embedding)
            if cos < th.min_cosine:
                continue
            iou = box_iou(box, node.box)
            if iou < th.min_iou:
                continue
            key = (-cos, -iou, nid)
            if best is None or key < best:
                best = key
        if best is None:
            nid = graph.new_id()
            graph.add_node(
                ObjectNode(
                    id=nid,
                    label_votes={det.label: 1},
                    embedding=np.array(det.embedding, dtype=float),
                    points=pts,
                    box=box,
                    detection_count=1,
                )
            )
            assignment.append("new")
        else:
            nid = best[2]
            node = graph.nodes[nid]
            _merge_into(node, pts, np.asarray(det.embedding, dtype=float), {det.label: 1}, 1, th.downsample_leaf)
            node_bounds[nid] = _bounds(node.box)
            assignment.append(nid)
    return graph, assignment


def merge_nodes(graph: SceneGraph, keep_id: int, drop_id: int, leaf: float) -> None:
    keep, drop = graph.nodes[keep_id], graph.nodes[drop_id]
    _merge_into(keep, drop.points, drop.embedding, drop.label_votes, drop.detection_count, leaf)
    graph.remove_node(drop_id)


def consolidate_nodes(graph: SceneGraph, th: AssociationThresholds = AssociationThresholds()) -> SceneGraph:
    """Fuse duplicate nodes, highest-IoU qualifying pair first, until none qualifies.

    The survivor keeps the smaller id; edges touching the dropped id are removed.
    """
    pair_cache: dict[tuple[int, int], float] = {}
    while True:
        ids = sorted(graph.nodes)
        bounds = {i: _bounds(graph.nodes[i].box) for i in ids}
        best = None
        for x, a in enumerate(ids):
            na = graph.nodes[a]
            for b in ids[x + 1 :]:
                if not _may_overlap(bounds[a], bounds[b]):
                    continue
                key = (a, b)
                if key not in pair_cache:
                    nb = graph.nodes[b]
                    if cosine_similarity(na.embedding, nb.embedding) < th.min_cosine:
                        pair_cache[key] = -1.0
                    else:
                        pair_cache[key] = box_iou(na.box, nb.box)
                iou = pair_cache[key]
                if iou >= th.consolidate_iou and (best is None or (-iou, a, b) < best):
                    best = (-iou, a, b)
        if best is None:
            return graph
        _, a, b = best
        merge_nodes(graph, a, b, th.downsample_leaf)
        pair_cache = {k: v for k, v in pair_cache.items() if a not in k and b not in k}
