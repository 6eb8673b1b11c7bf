from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activesg.errors import InvalidArgument
from activesg.geometry import OrientedBox, fit_oriented_box
from activesg.scene_model import (
    Detection,
    ObjectNode,
    RelationEdge,
    SceneGraph,
    cosine_similarity,
    embed_label,
    normalize,
)


def test_embed_label_deterministic_and_unit():
    a = embed_label("chair", 64, 7)
    b = embed_label("chair", 64, 7)
    assert np.array_equal(a, b)
    assert cosine_similarity(a, b) == 1.0
    assert abs(np.linalg.norm(a) - 1.0) < 1e-9


def test_embed_label_depends_on_seed_and_dim():
    assert not np.array_equal(embed_label("chair", 64, 7), embed_label("chair", 64, 8))
    assert embed_label("chair", 16, 7).shape == (16,)


def test_embed_label_errors():
    with pytest.raises(InvalidArgument):
        embed_label("", 64, 0)
    with pytest.raises(InvalidArgument):
        embed_label("chair", 4, 0)


def test_chair_table_distinct():
    assert abs(cosine_similarity(embed_label("chair", 64, 7), embed_label("table", 64, 7))) < 0.5


def test_distinct_labels_near_orthogonal_over_ten_thousand_pairs():
    labels = [f"label_{i}" for i in range(142)]  # C(142, 2) = 10011 pairs
    e = np.array([embed_label(l, 64, 3) for l in labels])
    c = np.abs(e @ e.T)[np.triu_indices(len(labels), 1)]
    assert len(c) >= 10**4
    frac_ok = np.mean(c < 0.5)
    print(f"max |cosine| over {len(c)} pairs: {c.max():.4f}, fraction < 0.5: {frac_ok:.5f}")
    assert frac_ok >= 0.999


def test_cosine_examples():
    v = embed_label("sofa")
    assert cosine_similarity(v, v) == pytest.approx(1.0)
    assert cosine_similarity(v, -v) == pytest.approx(-1.0)
    assert cosine_similarity(np.eye(3)[0], np.eye(3)[1]) == 0.0
    with pytest.raises(InvalidArgument):
        cosine_similarity(np.ones(3), np.ones(4))


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 50), seed=st.integers(0, 1000))
def test_running_mean_of_identical_embeddings_is_exact(k, seed):
    e = embed_label("lamp", 64, seed)
    acc = np.array(e)
    n = 1
    for _ in range(k):
        acc = normalize(acc * n + e * 1)
        n += 1
    assert np.allclose(acc, e, atol=1e-12)


def test_detection_requires_positive_depth():
    e = embed_label("cup")
    with pytest.raises(InvalidArgument):
        Detection("cup", e, np.array([[0.0, 0.0, -1.0]]))
    with pytest.raises(InvalidArgument):
        Detection("cup", e, np.zeros((0, 3)))


def make_node(nid: int, center=(0.0, 0.0, 0.5), label="chair", votes=None) -> ObjectNode:
    pts = np.asarray(center) + np.random.default_rng(nid).uniform(-0.2, 0.2, (30, 3))
    votes = votes or {label: 1}
    return ObjectNode(nid, votes, np.array(embed_label(label)), pts, fit_oriented_box(pts), sum(votes.values()))


def test_node_label_ties_lexicographic():
    n = make_node(0, votes={"table": 2, "desk": 2, "cup": 1})
    assert n.label == "desk"
    n.check()


def test_box_contains_points():
    n = make_node(3)
    assert n.box.contains(n.points, tol=1e-9).mean() >= 0.99


def test_edge_invariants():
    with pytest.raises(InvalidArgument):
        RelationEdge(1, 1, "next_to")
    with pytest.raises(InvalidArgument):
        RelationEdge(1, 2, "near")
    g = SceneGraph()
    g.add_node(make_node(0))
    g.add_node(make_node(1, (2, 0, 0.5)))
    with pytest.raises(InvalidArgument):
        g.set_edges([RelationEdge(0, 1, "next_to"), RelationEdge(0, 1, "under")])
    with pytest.raises(InvalidArgument):
        g.set_edges([RelationEdge(0, 7, "next_to")])
    g.set_edges([RelationEdge(0, 1, "next_to"), RelationEdge(1, 0, "next_to")])
    g.remove_node(1)
    assert g.edges == []
    g.check()


def test_ids_monotone():
    g = SceneGraph()
    ids = [g.new_id() for _ in range(3)]
    assert ids == [0, 1, 2]
    g.add_node(make_node(10))
    assert g.new_id() == 11
    with pytest.raises(InvalidArgument):
        g.add_node(make_node(10))


def test_export_schema_round_trip():
    g = SceneGraph()
    g.add_node(make_node(0, label="table"))
    g.add_node(make_node(1, (0.1, 0.0, 1.2), label="cup"))
    g.set_edges([RelationEdge(1, 0, "on_top_of"), RelationEdge(0, 1, "supports")])
    g.step = 4
    d = json.loads(json.dumps(g.to_dict()))
    assert set(d) == {"nodes", "edges", "step"}
    assert set(d["nodes"][0]) == {"id", "label", "label_votes", "centroid", "box", "detection_count"}
    assert set(d["nodes"][0]["box"]) == {"center", "yaw", "extents"}
    h = SceneGraph.from_dict(d)
    assert h.to_dict()["edges"] == d["edges"] and h.step == 4
    for a, b in zip(h.sorted_nodes(), g.sorted_nodes()):
        assert a.label == b.label and a.box.to_dict() == b.box.to_dict()


def test_snapshot_is_deep():
    g = SceneGraph()
    g.add_node(make_node(0))
    s = g.snapshot()
    g.nodes[0].label_votes["chair"] += 1
    assert s.nodes[0].label_votes["chair"] == 1


def test_oriented_box_dict_round_trip():
    b = OrientedBox(np.array([1.0, 2.0, 3.0]), 0.3, np.array([1.0, 2.0, 0.5]))
    assert OrientedBox.from_dict(b.to_dict()).to_dict() == b.to_dict()
