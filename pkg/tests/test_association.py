from __future__ import annotations

import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activesg.association import (
    AssociationThresholds,
    associate_detections,
    consolidate_nodes,
    merge_nodes,
    voxel_downsample,
)
from activesg.errors import InvalidArgument
from activesg.geometry import OrientedBox, Pose, box_iou, fit_oriented_box
from activesg.scene_model import Detection, SceneGraph, cosine_similarity, embed_label

from oracles import monte_carlo_iou

TH = AssociationThresholds()


def box_points(center, extents, n=6, yaw=0.0) -> np.ndarray:
    """Surface-and-interior lattice filling an axis box, optionally yawed."""
    g = np.linspace(-0.5, 0.5, n)
    local = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3) * np.asarray(extents)
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return local @ rot.T + np.asarray(center)


def det(label, center, extents=(0.5, 0.5, 0.5), embedding=None, seed=0) -> Detection:
    emb = embed_label(label, 64, seed) if embedding is None else embedding
    return Detection(label, emb, box_points(center, extents))


CAM = Pose.identity()  # camera frame == world, points kept at z > 0


def test_threshold_validation():
    with pytest.raises(InvalidArgument):
        AssociationThresholds(min_cosine=0)
    with pytest.raises(InvalidArgument):
        AssociationThresholds(consolidate_iou=1.5)
    with pytest.raises(InvalidArgument):
        AssociationThresholds(downsample_leaf=0)
    AssociationThresholds(min_iou=1.0 + 1e-9)  # disables merging


def test_empty_detections_is_identity():
    g = SceneGraph()
    g, a = associate_detections(g, [], CAM)
    assert len(g) == 0 and a == []


def test_same_object_seen_twice_merges():
    g = SceneGraph()
    g, a1 = associate_detections(g, [det("chair", (0, 0, 2))], CAM)
    shifted = Pose.from_translation([0.02, 0.0, 0.0])
    g, a2 = associate_detections(g, [Detection("chair", embed_label("chair"), box_points((-0.02, 0, 2), (0.5, 0.5, 0.5)))], shifted)
    assert a1 == ["new"] and a2 == [0]
    assert len(g) == 1 and g.nodes[0].detection_count == 2
    g.check()


def test_far_objects_stay_separate():
    g, a = associate_detections(SceneGraph(), [det("chair", (0, 0, 2)), det("table", (5, 0, 2))], CAM)
    assert len(g) == 2 and a == ["new", "new"]


def test_iou_just_under_gate_creates_new_node():
    # unit cubes offset along x by d: IoU = (1 - d) / (1 + d); solve for 0.19
    d = 0.81 / 1.19
    a = OrientedBox(np.array([0.0, 0.0, 2.0]), 0.0, np.ones(3))
    b = OrientedBox(np.array([d, 0.0, 2.0]), 0.0, np.ones(3))
    mc = monte_carlo_iou(a, b, 10**6, np.random.default_rng(0))
    assert abs(mc - 0.19) < 5e-3 and box_iou(a, b) == pytest.approx(0.19)

    e = np.array(embed_label("chair"))
    perp = np.array(embed_label("other"))
    perp -= (perp @ e) * e
    perp /= np.linalg.norm(perp)
    e95 = 0.95 * e + math.sqrt(1 - 0.95**2) * perp
    assert cosine_similarity(e, e95) == pytest.approx(0.95)

    g, _ = associate_detections(SceneGraph(), [Detection("chair", e, box_points((0, 0, 2), (1, 1, 1), 11))], CAM)
    g, a2 = associate_detections(g, [Detection("chair", e95, box_points((d, 0, 2), (1, 1, 1), 11))], CAM)
    assert a2 == ["new"] and len(g) == 2
    # and just above the gate it merges
    d_ok = 0.79 / 1.21
    g, _ = associate_detections(SceneGraph(), [Detection("chair", e, box_points((0, 0, 2), (1, 1, 1), 11))], CAM)
    g, a3 = associate_detections(g, [Detection("chair", e95, box_points((d_ok, 0, 2), (1, 1, 1), 11))], CAM)
    assert a3 == [0]


def test_cosine_gate():
    g, _ = associate_detections(SceneGraph(), [det("chair", (0, 0, 2))], CAM)
    g, a = associate_detections(g, [det("table", (0, 0, 2))], CAM)
    assert a == ["new"]


def test_highest_cosine_wins():
    g, _ = associate_detections(SceneGraph(), [det("chair", (0, 0, 2)), det("stool", (0.05, 0, 2))], CAM)
    assert len(g) == 2  # new nodes are not candidates within the same frame
    g, a = associate_detections(g, [det("stool", (0.02, 0, 2))], CAM)
    assert a == [1]


def test_idempotence_same_frame_twice():
    frame = [det("chair", (0, 0, 2)), det("table", (2, 0, 3), (1.2, 0.8, 0.7)), det("cup", (0, 2, 2), (0.1, 0.1, 0.1))]
    once, _ = associate_detections(SceneGraph(), frame, CAM)
    twice, _ = associate_detections(copy.deepcopy(once), frame, CAM)
    assert len(twice) == len(once)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), frames=st.integers(1, 5))
def test_detection_count_equals_detections_processed(seed, frames):
    rng = np.random.default_rng(seed)
    labels = ["chair", "table", "cup", "lamp"]
    g = SceneGraph()
    total = 0
    for _ in range(frames):
        n = int(rng.integers(0, 5))
        dets = [det(labels[rng.integers(4)], rng.uniform([-1, -1, 1], [1, 1, 3]), rng.uniform(0.1, 0.8, 3)) for _ in range(n)]
        g, a = associate_detections(g, dets, CAM)
        total += n
        assert len(a) == n
    assert sum(node.detection_count for node in g.nodes.values()) == total
    g.check()
    before = len(g)
    consolidate_nodes(g)
    assert len(g) <= before
    assert sum(node.detection_count for node in g.nodes.values()) == total
    snap = g.to_dict()
    consolidate_nodes(g)
    assert g.to_dict() == snap


def test_disabled_gate_every_detection_new():
    th = AssociationThresholds(min_iou=1.0 + 1e-9)
    frame = [det("chair", (0, 0, 2))]
    g = SceneGraph()
    for _ in range(4):
        g, _ = associate_detections(g, frame, CAM, th)
    assert len(g) == 4


def test_merge_keeps_smaller_id_and_renormalises():
    g, _ = associate_detections(SceneGraph(), [det("chair", (0, 0, 2))], CAM)
    g, _ = associate_detections(g, [det("chair", (0, 0, 2))], CAM, AssociationThresholds(min_iou=1.5))
    assert sorted(g.nodes) == [0, 1]
    consolidate_nodes(g)
    assert sorted(g.nodes) == [0]
    node = g.nodes[0]
    assert node.detection_count == 2 and node.label_votes == {"chair": 2}
    assert np.array_equal(node.embedding, embed_label("chair"))


def test_consolidate_examples():
    g, _ = associate_detections(SceneGraph(), [det("sofa", (0, 0, 2), (1, 1, 1))], CAM)
    g, _ = associate_detections(g, [det("sofa", (0.05, 0, 2), (1, 1, 1))], CAM, AssociationThresholds(min_iou=1.5))
    assert len(g) == 2 and box_iou(g.nodes[0].box, g.nodes[1].box) > 0.8
    assert len(consolidate_nodes(g)) == 1

    g, _ = associate_detections(SceneGraph(), [det("sofa", (0, 0, 2)), det("sofa", (3, 0, 2)), det("sofa", (6, 0, 2))], CAM)
    snap = g.to_dict()
    assert consolidate_nodes(g).to_dict() == snap


def _all_merge_orders(graph: SceneGraph, th: AssociationThresholds) -> list[SceneGraph]:
    """Terminal graphs over every sequence of qualifying pair merges."""
    ids = sorted(graph.nodes)
    pairs = [
        (a, b)
        for i, a in enumerate(ids)
        for b in ids[i + 1 :]
        if box_iou(graph.nodes[a].box, graph.nodes[b].box) >= th.consolidate_iou
        and cosine_similarity(graph.nodes[a].embedding, graph.nodes[b].embedding) >= th.min_cosine
    ]
    if not pairs:
        return [graph]
    out = []
    for a, b in pairs:
        g = copy.deepcopy(graph)
        merge_nodes(g, a, b, th.downsample_leaf)
        out.extend(_all_merge_orders(g, th))
    return out


def test_three_fragments_single_node_any_order():
    th = AssociationThresholds(min_iou=1.5)  # keep fragments apart during association
    frags = [det("bed", (x, 0, 2), (1.6, 1.0, 0.6)) for x in (0.0, 0.2, 0.4)]
    g, _ = associate_detections(SceneGraph(), frags, CAM, th)
    assert len(g) == 3
    ends = _all_merge_orders(g, AssociationThresholds())
    assert len(ends) >= 2
    assert all(len(e) == 1 and list(e.nodes) == [0] and e.nodes[0].detection_count == 3 for e in ends)
    result = consolidate_nodes(g)
    assert list(result.nodes) == [0] and result.nodes[0].detection_count == 3


def test_voxel_downsample_one_point_per_cell():
    pts = np.random.default_rng(0).uniform(0, 1, (2000, 3))
    out = voxel_downsample(pts, 0.25)
    assert len(out) == 64
    cells = np.floor(out / 0.25)
    assert len(np.unique(cells, axis=0)) == 64


def test_fit_after_merge_contains_points():
    g, _ = associate_detections(SceneGraph(), [det("desk", (0, 0, 2), (1.0, 0.5, 0.7))], CAM)
    g, _ = associate_detections(g, [det("desk", (0.1, 0.05, 2), (1.0, 0.5, 0.7))], CAM)
    node = g.nodes[0]
    assert node.box.contains(node.points, tol=1e-9).mean() >= 0.99
    assert node.box.to_dict() == fit_oriented_box(node.points).to_dict()
