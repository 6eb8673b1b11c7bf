"""Optional HTTP completion sampler with fallback to the built-in one.

Request body: ``{graph, unknown_components: [{bbox, voxel_count}], num_samples, seed}``.
Expected reply: ``{samples: [{hypothesized_objects: [{label, box: {center, yaw, extents}}]}]}``.
"""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request

from activesg.exploration.completion import (
    CompletionSample,
    HypothesizedObject,
    build_sample,
    sample_completions,
    unknown_components,
)
from activesg.geometry.boxes import OrientedBox
from activesg.geometry.voxels import VoxelGrid
from activesg.priors import Priors
from activesg.scene_model import SceneGraph

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


class RemoteSampler:
    def __init__(self, url: str, priors: Priors | None, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.url = url
        self.priors = priors
        self.timeout = timeout
        self.fallbacks = 0

    def _request(self, body: dict) -> dict:
        req = urllib.request.Request(
            self.url,
            data=json.dumps(body).encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            if resp.status != 200:
                raise urllib.error.HTTPError(self.url, resp.status, "non-200 reply", resp.headers, None)
            return json.loads(resp.read().decode("utf-8"))

    def __call__(self, graph: SceneGraph, grid: VoxelGrid, scene_bounds: tuple, K: int, seed: int) -> list[CompletionSample]:
        comps = unknown_components(grid, float(scene_bounds[0][2]))
        body = {
            "graph": graph.to_dict(),
            "unknown_components": [c.to_dict() for c in comps],
            "num_samples": K,
            "seed": int(seed),
        }
        try:
            reply = self._request(body)
            samples = []
            for s in reply["samples"][:K]:
                objs = [
                    HypothesizedObject(o["label"], OrientedBox.from_dict(o["box"]))
                    for o in s.get("hypothesized_objects", [])
                ]
                samples.append(build_sample(grid, objs))
            if len(samples) < K:
                raise ValueError(f"remote sampler returned {len(samples)} of {K} samples")
            return samples
        except (OSError, ValueError, KeyError, TypeError) as exc:
            self.fallbacks += 1
            log.warning("remote sampler at %s failed (%s); using built-in sampler", self.url, exc)
            return sample_completions(graph, grid, scene_bounds, K, seed, self.priors)
