"""The exploration loop: render, reconstruct, associate, relate, evaluate, plan, move."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from activesg.association import associate_detections, consolidate_nodes
from activesg.errors import ExplorationComplete, ExplorationExhausted
from activesg.evaluation import StepRecord, match_nodes, compute_metrics, steps_csv
from activesg.exploration.planner import (
    Selection,
    select_nbv_frontier,
    select_nbv_random,
    select_nbv_semantic,
)
from activesg.exploration.remote import RemoteSampler
from activesg.geometry.factored import compose_backprojection
from activesg.geometry.pose import Pose, anchor_poses
from activesg.geometry.voxels import VoxelGrid, integrate_scan
from activesg.harness.config import ExperimentConfig, parse_camera_preset
from activesg.priors import default_priors
from activesg.relations import infer_edges
from activesg.scene_model import Detection, SceneGraph, Source
from activesg.simulator.render import RenderedBatch, render_batch
from activesg.simulator.scenes import SceneSpec, generate_scene
from activesg.simulator.viewpoints import ViewpointSet, navigable_viewpoints, overhead_cameras

log = logging.getLogger(__name__)

CONSOLIDATE_EVERY = 5


@dataclass
class ExperimentResult:
    graph: SceneGraph
    records: list[StepRecord]
    selections: list[dict] = field(default_factory=list)
    timing: list[dict] = field(default_factory=list)
    stop_reason: str = "completed"

    @property
    def graph_export(self) -> dict:
        return self.graph.to_dict()


def load_scene(config: ExperimentConfig) -> SceneSpec:
    ref = config.scene
    if ref.path is not None:
        return SceneSpec.load(ref.path)
    return _generated_scene(ref.template, ref.seed)


@lru_cache(maxsize=32)
def _generated_scene(template: str, seed: int) -> SceneSpec:
    return generate_scene(template, seed)


def external_poses(config: ExperimentConfig, scene: SceneSpec) -> list[Pose]:
    ext = config.external_cameras
    if isinstance(ext, str):
        n = parse_camera_preset(ext)
        return overhead_cameras(scene, n) if n else []
    return list(ext)


def start_viewpoint(config: ExperimentConfig, viewpoints: ViewpointSet) -> int:
    """One of ``num_start_poses`` distinct start poses drawn from the experiment seed."""
    rng = np.random.default_rng([int(config.experiment_seed), 101])
    k = min(config.num_start_poses, len(viewpoints))
    starts = rng.choice(len(viewpoints), size=k, replace=False)
    return int(starts[config.start_index % k])


def _step_seed(experiment_seed: int, step: int, salt: int) -> int:
    return int(np.random.SeedSequence([int(experiment_seed), int(step), salt]).generate_state(1)[0])


class Pipeline:
    """Per-experiment mutable state: graph, occupancy grid and thresholds."""

    def __init__(self, config: ExperimentConfig, scene: SceneSpec) -> None:
        self.config = config
        self.scene = scene
        self.graph = SceneGraph()
        self.grid = VoxelGrid.covering(scene.bounds[0], scene.bounds[1], config.grid_resolution)

    def _view_geometry(self, batch: RenderedBatch) -> list[tuple[Pose, np.ndarray, list[Detection]]]:
        """Per view: global camera pose, world scan points and detections (camera frame)."""
        out = []
        if self.config.geometry_source == "ground_truth":
            for v in batch.views:
                rays = v.factored.rays
                dets = [
                    Detection(d.label, d.embedding, v.gt_depths[d.pixels][:, None] * rays[d.pixels], d.source, d.pixels)
                    for d in v.detections
                ]
                out.append((v.true_pose, v.gt_points(), dets))
            return out
        # RGB-only path: only the factored reconstruction and the batch anchor are used
        poses = anchor_poses(batch.anchor_pose, [v.factored.relative_pose for v in batch.views])
        for v, pose in zip(batch.views, poses):
            pts = batch.anchor_pose.apply(compose_backprojection(v.factored))
            out.append((pose, pts, v.detections))
        return out

    def process(self, batch: RenderedBatch) -> None:
        th = self.config.association
        for pose, pts, dets in self._view_geometry(batch):
            integrate_scan(self.grid, pose.translation, pts)
            associate_detections(self.graph, dets, pose, th)

    def relate(self, step: int) -> None:
        if step > 0 and step % CONSOLIDATE_EVERY == 0:
            consolidate_nodes(self.graph, self.config.association)
        infer_edges(self.graph, self.config.relations)
        self.graph.step = step

    def metrics(self) -> tuple[float, float, float]:
        m = match_nodes(self.graph, self.scene, self.config.matching, self.config.experiment_seed)
        return compute_metrics(m, len(self.graph), len(self.scene.objects))


def _render(pipe: Pipeline, poses: list[Pose], step: int, sources: list[Source] | None = None) -> RenderedBatch:
    c = pipe.config
    return render_batch(pipe.scene, poses, c.camera, c.noise, step, c.experiment_seed, sources, dim=64)


def run_experiment(config: ExperimentConfig, scene: SceneSpec | None = None) -> ExperimentResult:
    """Run one experiment; writes its artefacts when ``config.output_dir`` is set."""
    scene = scene if scene is not None else load_scene(config)
    pipe = Pipeline(config, scene)
    planner = config.planner
    priors = default_priors()
    sampler = RemoteSampler(config.remote_sampler, priors) if config.remote_sampler else None
    n_gt = len(scene.objects)
    records: list[StepRecord] = []
    selections: list[dict] = []
    timing: list[dict] = []
    stop_reason = "completed"

    def record(step: int, sel: Selection | None, travel: float, t0: float) -> None:
        p, r, f = pipe.metrics()
        ms = (time.perf_counter() - t0) * 1e3
        timing.append({"step": step, "wall_ms": ms})
        records.append(
            StepRecord(
                step=step,
                planner=planner.planner,
                nodes_pred=len(pipe.graph),
                nodes_gt=n_gt,
                precision=p,
                recall=r,
                f1=f,
                selected_viewpoint=-1 if sel is None else sel.viewpoint,
                selected_score=0.0 if sel is None else sel.score,
                travel_m=travel,
                wall_ms=ms if config.record_wall_time else 0.0,
            )
        )

    # step 0: external cameras as one batch anchored at the first camera's known pose
    t0 = time.perf_counter()
    ext = external_poses(config, scene)
    if ext:
        batch = _render(pipe, ext, 0, [Source.external(i) for i in range(len(ext))])
        pipe.process(batch)
    pipe.relate(0)
    record(0, None, 0.0, t0)

    if not config.static_only:
        viewpoints = navigable_viewpoints(scene, config.viewpoint_spacing, config.viewpoint_headings)
        current = start_viewpoint(config, viewpoints)
        travel = 0.0
        for step in range(1, config.steps + 1):
            t0 = time.perf_counter()
            pipe.process(_render(pipe, [viewpoints.pose(current)], step))
            pipe.relate(step)
            sel = None
            try:
                sel = _select(pipe, viewpoints, current, step, sampler, priors)
            except (ExplorationComplete, ExplorationExhausted) as exc:
                stop_reason = type(exc).__name__
                log.info("stopping at step %d: %s", step, exc)
            record(step, sel, travel, t0)
            if sel is None:
                break
            selections.append({"step": step, "current": current, **sel.log_record()})
            travel += float(np.linalg.norm(viewpoints.positions[sel.viewpoint] - viewpoints.positions[current]))
            current = sel.viewpoint

    result = ExperimentResult(pipe.graph, records, selections, timing, stop_reason)
    if config.output_dir:
        write_outputs(config, result)
    return result


def _select(pipe: Pipeline, viewpoints: ViewpointSet, current: int, step: int, sampler, priors) -> Selection:
    c = pipe.config
    name = c.planner.planner
    if name == "frontier":
        return select_nbv_frontier(pipe.grid, viewpoints, c.planning_camera, c.planner, current)
    if name == "random":
        return select_nbv_random(pipe.grid, viewpoints, _step_seed(c.experiment_seed, step, 2), current)
    return select_nbv_semantic(
        pipe.graph,
        pipe.grid,
        viewpoints,
        c.planning_camera,
        c.planner,
        _step_seed(c.experiment_seed, step, 1),
        priors,
        pipe.scene.bounds,
        current,
        sampler,
    )


def write_outputs(config: ExperimentConfig, result: ExperimentResult) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "steps.csv").write_text(steps_csv(result.records), encoding="utf-8", newline="\n")
    (out / "graph_final.json").write_text(json.dumps(result.graph_export, indent=1) + "\n", encoding="utf-8")
    (out / "config.json").write_text(config.to_json(), encoding="utf-8")
    with open(out / "scores.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for s in result.selections:
            fh.write(json.dumps(s) + "\n")
    # wall-clock numbers are kept apart so the files above stay byte-reproducible
    (out / "timing.json").write_text(
        json.dumps({"stop_reason": result.stop_reason, "steps": result.timing}, indent=1) + "\n", encoding="utf-8"
    )
    return out
