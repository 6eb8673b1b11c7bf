from __future__ import annotations

import itertools
import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from importlib import resources

import numpy as np
import pytest

from activesg.errors import ConfigurationError, ExplorationComplete, ExplorationExhausted, InvalidArgument
from activesg.exploration import (
    CompletionSample,
    PlannerConfig,
    RemoteSampler,
    compute_frontiers,
    info_gain,
    sample_completions,
    select_nbv_frontier,
    select_nbv_random,
    select_nbv_semantic,
)
from activesg.exploration.completion import label_index, unknown_components
from activesg.exploration.infogain import info_gain_batch, predicted_observation
from activesg.geometry.voxels import visible_voxels
from activesg.geometry import FREE, OCCUPIED, UNKNOWN, CameraModel, OrientedBox, Pose, VoxelGrid
from activesg.priors import Priors, RoomPrior, default_priors
from activesg.scene_model import ObjectNode, SceneGraph, box_corners, embed_label
from activesg.simulator.viewpoints import ViewpointSet

from oracles import brute_visible

SMALL_CAM = CameraModel(horizontal_fov=1.2, width=12, height=9, max_range=2.0)


def graph_with(labels) -> SceneGraph:
    g = SceneGraph()
    for i, lab in enumerate(labels):
        b = OrientedBox(np.array([i * 1.0, 0.0, 0.5]), 0.0, np.full(3, 0.4))
        g.add_node(ObjectNode(i, {lab: 1}, np.array(embed_label(lab)), box_corners(b), b, 1))
    return g


# --- frontiers -----------------------------------------------------------------------


def test_frontier_trivial_cases():
    g = VoxelGrid([0, 0, 0], (4, 4, 4))
    assert compute_frontiers(g) == set()
    g.cells[:] = FREE
    assert compute_frontiers(g) == set()
    g.cells[:] = UNKNOWN
    g.cells[1, 2, 3] = FREE
    assert compute_frontiers(g) == {(1, 2, 3)}


def test_frontier_definition_random():
    rng = np.random.default_rng(0)
    g = VoxelGrid([0, 0, 0], (6, 5, 4))
    g.cells[:] = rng.integers(0, 3, g.dims)
    want = set()
    for i, j, k in itertools.product(*map(range, g.dims)):
        if g.cells[i, j, k] != FREE:
            continue
        for d in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            n = (i + d[0], j + d[1], k + d[2])
            if all(0 <= n[a] < g.dims[a] for a in range(3)) and g.cells[n] == UNKNOWN:
                want.add((i, j, k))
    assert compute_frontiers(g) == want


def corridor_grid() -> VoxelGrid:
    """4 m x 1 m x 1 m corridor, mapped for x < 2 m, unknown beyond."""
    g = VoxelGrid([0, 0, 0], (40, 10, 10), 0.1)
    g.cells[:20] = FREE
    return g


def vps(points, yaws) -> ViewpointSet:
    return ViewpointSet(np.asarray(points, dtype=float), np.asarray(yaws, dtype=float), pitch=0.0)


def test_frontier_dominance_and_complete():
    g = corridor_grid()
    v = vps([[1.0, 0.5, 0.5], [1.0, 0.5, 0.5]], [0.0, math.pi])
    sel = select_nbv_frontier(g, v, SMALL_CAM, PlannerConfig("frontier"))
    assert sel.viewpoint == 0 and sel.score > 0 and sel.scores[1] == 0
    g.cells[:] = FREE
    with pytest.raises(ExplorationComplete):
        select_nbv_frontier(g, v, SMALL_CAM, PlannerConfig("frontier"))


def test_no_candidates_exhausted():
    g = corridor_grid()
    v = vps([[3.0, 0.5, 0.5]], [0.0])  # stands in unknown space
    with pytest.raises(ExplorationExhausted):
        select_nbv_frontier(g, v, SMALL_CAM, PlannerConfig("frontier"))
    with pytest.raises(ExplorationExhausted):
        select_nbv_random(g, v, 0)


def brute_frontier_score(g: VoxelGrid, pose: Pose, cam: CameraModel) -> int:
    dirs = cam.ray_directions() @ pose.rotation.T
    seen = brute_visible(g.cells, g.to_voxel_coords(pose.translation)[0], dirs, cam.max_range / g.resolution)
    return len({v for v, _ in seen} & compute_frontiers(g))


def test_frontier_selection_matches_brute_force():
    rng = np.random.default_rng(11)
    for trial in range(5):
        g = VoxelGrid([0, 0, 0], (20, 20, 10), 0.1)
        g.cells[:] = rng.choice([UNKNOWN, FREE, OCCUPIED], size=g.dims, p=[0.3, 0.6, 0.1])
        pts = rng.uniform(0.3, 1.7, (3, 3))
        pts[:, 2] = rng.uniform(0.2, 0.8, 3)
        for p in pts:
            g.cells[tuple(g.index_of(p[None])[0])] = FREE
        v = vps(pts, rng.uniform(-math.pi, math.pi, 3))
        sel = select_nbv_frontier(g, v, SMALL_CAM, PlannerConfig("frontier"))
        brute = [brute_frontier_score(g, v.pose(i), SMALL_CAM) for i in range(3)]
        assert list(sel.scores) == brute, trial
        best = max(range(3), key=lambda i: (brute[i], -i))
        assert sel.viewpoint == best


# --- completion sampler ----------------------------------------------------------------


def half_known_grid() -> tuple[VoxelGrid, tuple]:
    rng = np.random.default_rng(4)
    g = VoxelGrid([0, 0, 0], (50, 40, 25), 0.1)
    g.cells[:25] = rng.choice([FREE, OCCUPIED], size=(25, 40, 25), p=[0.9, 0.1])
    return g, ((0.0, 0.0, 0.0), (5.0, 4.0, 2.5))


def test_samples_preserve_observed_content():
    g, bounds = half_known_grid()
    samples = sample_completions(graph_with(["bed", "nightstand"]), g, bounds, 6, 3, default_priors())
    assert len(samples) == 6
    known = g.cells != UNKNOWN
    assert any(s.hypothesized_objects for s in samples)
    for s in samples:
        assert np.array_equal(s.derived_occupancy[known], g.cells[known])
        assert set(np.unique(s.derived_occupancy[~known])) <= {FREE, OCCUPIED}
        for h in s.hypothesized_objects:
            # voxel centres inside the box must all be currently unknown
            idx = np.argwhere(np.ones(g.dims, bool))
            inside = h.box.contains(g.center_of(idx), tol=0.0)
            assert np.all(g.cells.reshape(-1)[inside] == UNKNOWN)
            assert abs(h.box.zmin - bounds[0][2]) < 0.1 + 1e-9


def test_sampler_deterministic_and_errors():
    g, bounds = half_known_grid()
    a = sample_completions(graph_with(["sofa"]), g, bounds, 3, 9, default_priors())
    b = sample_completions(graph_with(["sofa"]), g, bounds, 3, 9, default_priors())
    for x, y in zip(a, b):
        assert np.array_equal(x.voxel_labels, y.voxel_labels)
    with pytest.raises(InvalidArgument):
        sample_completions(SceneGraph(), g, bounds, 0, 0, default_priors())
    with pytest.raises(ConfigurationError):
        sample_completions(SceneGraph(), g, bounds, 2, 0, None)


def test_no_unknown_voxels_gives_empty_samples():
    g, bounds = half_known_grid()
    g.cells[g.cells == UNKNOWN] = FREE
    samples = sample_completions(SceneGraph(), g, bounds, 4, 0, default_priors())
    assert len(samples) == 4 and all(not s.hypothesized_objects for s in samples)
    assert all(np.array_equal(s.derived_occupancy, g.cells) for s in samples)


def test_degenerate_prior_identical_label_multisets():
    base = default_priors()
    g = VoxelGrid([0, 0, 0], (40, 40, 25), 0.1)
    bounds = ((0.0, 0.0, 0.0), (4.0, 4.0, 2.5))
    floor_area = len(unknown_components(g, 0.0)[0].floor_cells) * 0.01
    priors = Priors({"office": RoomPrior(1.0, (3, 3), floor_area, {"chair": 1.0})}, base.catalog, base.smoothing)
    samples = sample_completions(SceneGraph(), g, bounds, 8, 5, priors)
    multisets = {tuple(sorted(h.label for h in s.hypothesized_objects)) for s in samples}
    assert multisets == {("chair", "chair", "chair")}
    placements = {tuple(np.round(s.hypothesized_objects[0].box.center, 6)) for s in samples}
    assert len(placements) > 1


def hand_posterior(labels: list[str]) -> dict[str, float]:
    raw = json.loads((resources.files("activesg") / "assets" / "priors.json").read_text())
    eps = raw["smoothing"]
    score = {}
    for room, spec in raw["room_types"].items():
        total = sum(spec["labels"].values())
        p = spec["prior"]
        for lab in labels:
            p *= spec["labels"].get(lab, 0.0) / total + eps
        score[room] = p
    z = sum(score.values())
    return {k: v / z for k, v in score.items()}


def test_kitchen_posterior_sampling_frequency():
    post = hand_posterior(["stove", "sink"])
    assert post["kitchen"] > 0.9
    assert default_priors().room_posterior(["stove", "sink"])["kitchen"] == pytest.approx(post["kitchen"], rel=1e-12)
    g = VoxelGrid([0, 0, 0], (30, 30, 22), 0.1)
    bounds = ((0.0, 0.0, 0.0), (3.0, 3.0, 2.2))
    samples = sample_completions(graph_with(["stove", "sink"]), g, bounds, 100, 21, default_priors())
    rooms = [s.room_types[0] for s in samples]
    freq = rooms.count("kitchen") / len(rooms)
    assert freq > 0.9 and abs(freq - post["kitchen"]) <= 0.05


# --- information gain --------------------------------------------------------------------


def tiny_grid() -> VoxelGrid:
    return VoxelGrid([0, 0, 0], (20, 10, 10), 0.1)


POSE = Pose.look([0.05, 0.55, 0.55], 0.0, 0.0)


def manual_sample(grid: VoxelGrid, labels_at: dict[tuple[int, int, int], str]) -> CompletionSample:
    codes = label_index()
    occ = np.where(grid.cells == UNKNOWN, FREE, grid.cells).astype(np.int8)
    vl = np.zeros(grid.dims, dtype=np.int16)
    for v, lab in labels_at.items():
        occ[v] = OCCUPIED
        vl[v] = codes[lab]
    return CompletionSample([], occ, vl)


def target_voxel(grid: VoxelGrid) -> tuple[int, int, int]:
    # a voxel about half a metre ahead that the camera's rays actually reach
    free = np.full(grid.dims, FREE, dtype=np.int8)
    reached = np.unravel_index(visible_voxels(grid, POSE, SMALL_CAM, free), grid.dims)
    cand = [v for v in zip(*reached) if v[0] == 5]
    return tuple(int(i) for i in cand[0])


def test_info_gain_all_agree_zero():
    g = tiny_grid()
    v = target_voxel(g)
    s = [manual_sample(g, {v: "chair"}) for _ in range(4)]
    assert info_gain(POSE, s, g, SMALL_CAM) == 0.0


def test_info_gain_one_bit():
    g = tiny_grid()
    v = target_voxel(g)
    s = [manual_sample(g, {v: lab}) for lab in ("chair", "chair", "dining_table", "dining_table")]
    assert info_gain(POSE, s, g, SMALL_CAM) == pytest.approx(1.0, abs=1e-12)


def test_info_gain_three_samples_closed_form():
    g = tiny_grid()
    v = target_voxel(g)
    s = [manual_sample(g, {v: lab}) for lab in ("chair", "chair", "dining_table")]
    expect = -(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3)
    assert expect == pytest.approx(0.9183, abs=1e-4)
    assert info_gain(POSE, s, g, SMALL_CAM) == pytest.approx(expect, abs=1e-12)
    batch = info_gain_batch(g, POSE.translation[None], POSE.rotation[None], s, SMALL_CAM)
    assert batch[0] == pytest.approx(expect, abs=1e-9)


def test_info_gain_needs_two_samples():
    g = tiny_grid()
    with pytest.raises(InvalidArgument):
        info_gain(POSE, [manual_sample(g, {})], g, SMALL_CAM)


def random_instance(rng: np.random.Generator):
    g = VoxelGrid([0, 0, 0], (6, 6, 6), 0.1)
    g.cells[:] = rng.choice([UNKNOWN, FREE, OCCUPIED], size=g.dims, p=[0.7, 0.25, 0.05])
    k = int(rng.integers(2, 6))
    labs = ["chair", "dining_table", "bed"]
    samples = []
    unknown = np.argwhere(g.cells == UNKNOWN)
    for _ in range(k):
        pick = unknown[rng.random(len(unknown)) < 0.15]
        samples.append(manual_sample(g, {tuple(p): labs[rng.integers(3)] for p in pick}))
    pos = rng.uniform(0.05, 0.55, 3)
    g.cells[tuple(g.index_of(pos[None])[0])] = FREE
    for s in samples:
        s.derived_occupancy[tuple(g.index_of(pos[None])[0])] = FREE
        s.voxel_labels[tuple(g.index_of(pos[None])[0])] = 0
    pose = Pose.look(pos, rng.uniform(-math.pi, math.pi), rng.uniform(-1, 1))
    return g, samples, pose


CAM_6 = CameraModel(horizontal_fov=1.4, width=8, height=8, max_range=0.6)


def test_info_gain_properties_over_1000_instances():
    rng = np.random.default_rng(2025)
    for trial in range(1000):
        g, samples, pose = random_instance(rng)
        ig = info_gain(pose, samples, g, CAM_6)
        assert ig >= 0.0
        perm = [samples[i] for i in rng.permutation(len(samples))]
        assert info_gain(pose, perm, g, CAM_6) == pytest.approx(ig, abs=1e-9)
        obs = [predicted_observation(pose, s, g, CAM_6) for s in samples]
        common = set(obs[0]).intersection(*obs[1:])
        agree = all(len({o[c] for o in obs}) == 1 for c in common)
        assert (ig == 0.0) == agree, trial
        batch = info_gain_batch(g, pose.translation[None], pose.rotation[None], samples, CAM_6)
        assert batch[0] == pytest.approx(ig, abs=1e-9), trial
        if trial % 10 == 0:
            dup = samples + [samples[0]]
            obs_d = [predicted_observation(pose, s, g, CAM_6) for s in dup]
            for c in common:
                assert {o[c] for o in obs_d} <= {o[c] for o in obs}


# --- semantic planner ------------------------------------------------------------------


def fixed_sampler(samples):
    def sampler(graph, grid, bounds, k, seed):
        return samples[:k]

    return sampler


def test_semantic_all_agree_picks_nearest():
    g = corridor_grid()
    v = vps([[0.5, 0.5, 0.5], [1.5, 0.5, 0.5], [1.0, 0.5, 0.5], [0.2, 0.5, 0.5]], [0.0, 0.0, math.pi, 0.0])
    same = [manual_sample(g, {(30, 5, 5): "chair"}) for _ in range(4)]
    sel = select_nbv_semantic(
        SceneGraph(), g, v, SMALL_CAM, PlannerConfig("semantic", 4), 0, default_priors(), ((0, 0, 0), (4, 1, 1)),
        current=0, sampler=fixed_sampler(same),
    )
    assert np.all(sel.scores == 0.0)
    # travel from viewpoint 0 (x=0.5): 1.0, 0.5, 0.3 -> id 3
    assert sel.viewpoint == 3


def test_semantic_prefers_disagreement_and_matches_brute_force():
    g = corridor_grid()
    v = vps(
        [[1.0, 0.5, 0.5], [1.0, 0.5, 0.5], [1.5, 0.5, 0.5], [0.5, 0.5, 0.5]],
        [0.0, math.pi, math.pi / 2, 0.1],
    )
    labs = ["chair", "dining_table", "bed", "chair"]
    samples = [manual_sample(g, {(25, 5, 5): lab, (26, 4, 5): labs[(i + 1) % 4]}) for i, lab in enumerate(labs)]
    sel = select_nbv_semantic(
        SceneGraph(), g, v, SMALL_CAM, PlannerConfig("semantic", 4), 0, default_priors(), ((0, 0, 0), (4, 1, 1)),
        sampler=fixed_sampler(samples),
    )
    brute = [info_gain(v.pose(i), samples, g, SMALL_CAM) for i in range(4)]
    assert np.allclose(sel.scores, brute, atol=1e-9)
    assert sel.scores[1] == 0.0 and sel.scores[0] > 0
    assert sel.viewpoint == max(range(4), key=lambda i: (round(brute[i], 9), -i))


def test_semantic_with_builtin_sampler_runs():
    g, bounds = half_known_grid()
    v = vps([[1.0, 2.0, 1.2], [1.0, 2.0, 1.2]], [0.0, math.pi])
    sel = select_nbv_semantic(graph_with(["bed"]), g, v, CameraModel(width=16, height=12), PlannerConfig(), 1, default_priors(), bounds)
    assert sel.viewpoint == 0 and sel.score > 0
    assert len(sel.log_record()["hypothesized_per_sample"]) == 8


def test_planner_config_validation():
    with pytest.raises(InvalidArgument):
        PlannerConfig("semantic", 1)
    with pytest.raises(InvalidArgument):
        PlannerConfig("greedy")
    PlannerConfig("frontier", 1)


def test_random_planner_deterministic():
    g = corridor_grid()
    v = vps([[x, 0.5, 0.5] for x in (0.3, 0.8, 1.3, 1.8)], [0.0] * 4)
    a = select_nbv_random(g, v, 5, current=1).viewpoint
    assert a == select_nbv_random(g, v, 5, current=1).viewpoint and a != 1


# --- remote sampler ----------------------------------------------------------------------


class _Handler(BaseHTTPRequestHandler):
    reply: tuple[int, bytes] = (500, b"boom")
    bodies: list = []

    def do_POST(self):  # noqa: N802
        n = int(self.headers["Content-Length"])
        type(self).bodies.append(json.loads(self.rfile.read(n)))
        code, body = self.reply
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    handler = type("H", (_Handler,), {"bodies": []})
    srv = HTTPServer(("127.0.0.1", 0), handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield srv, handler
    srv.shutdown()


def test_remote_sampler_falls_back_on_500(server, caplog):
    srv, handler = server
    handler.reply = (500, b"boom")
    g, bounds = half_known_grid()
    remote = RemoteSampler(f"http://127.0.0.1:{srv.server_port}/", default_priors(), timeout=5)
    got = remote(graph_with(["bed"]), g, bounds, 3, 4)
    want = sample_completions(graph_with(["bed"]), g, bounds, 3, 4, default_priors())
    assert remote.fallbacks == 1
    assert "using built-in sampler" in caplog.text
    assert all(np.array_equal(a.voxel_labels, b.voxel_labels) for a, b in zip(got, want))
    body = handler.bodies[0]
    assert set(body) == {"graph", "unknown_components", "num_samples", "seed"}
    assert body["num_samples"] == 3 and set(body["unknown_components"][0]) == {"bbox", "voxel_count"}


def test_remote_sampler_uses_reply(server):
    srv, handler = server
    box = {"center": [4.0, 2.0, 0.45], "yaw": 0.0, "extents": [0.5, 0.5, 0.9]}
    reply = {"samples": [{"hypothesized_objects": [{"label": "chair", "box": box}]}, {"hypothesized_objects": []}]}
    handler.reply = (200, json.dumps(reply).encode())
    g, bounds = half_known_grid()
    remote = RemoteSampler(f"http://127.0.0.1:{srv.server_port}/", default_priors(), timeout=5)
    got = remote(SceneGraph(), g, bounds, 2, 0)
    assert remote.fallbacks == 0
    assert [h.label for h in got[0].hypothesized_objects] == ["chair"] and got[1].hypothesized_objects == []


def test_remote_sampler_unreachable_falls_back():
    g, bounds = half_known_grid()
    remote = RemoteSampler("http://127.0.0.1:9/", default_priors(), timeout=1)
    assert len(remote(SceneGraph(), g, bounds, 2, 0)) == 2 and remote.fallbacks == 1
