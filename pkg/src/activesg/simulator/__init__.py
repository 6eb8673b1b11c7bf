from activesg.simulator.render import NoiseModel, RenderedBatch, RenderedView, render_batch, render_view, visible_objects
from activesg.simulator.scenes import SceneSpec, generate_scene
from activesg.simulator.viewpoints import ViewpointSet, navigable_viewpoints, overhead_cameras

__all__ = [
    "NoiseModel",
    "RenderedBatch",
    "RenderedView",
    "SceneSpec",
    "ViewpointSet",
    "generate_scene",
    "navigable_viewpoints",
    "overhead_cameras",
    "render_batch",
    "render_view",
    "visible_objects",
]
