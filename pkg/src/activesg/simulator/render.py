"""Ray-cast rendering of segment-level detections and factored geometry.

No pixels are synthesised: each view yields what the perception front-end
would hand downstream (instance masks lifted through predicted depth, label
embeddings) together with a noisy factored reconstruction of the view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from activesg.errors import InvalidArgument
from activesg.geometry.camera import CameraModel
from activesg.geometry.factored import FactoredView
from activesg.geometry.pose import Pose, small_rotation
from activesg.priors import default_priors, default_vocabulary
from activesg.scene_model import EMBED_DIM, Detection, Source, embed_label
from activesg.simulator.scenes import SceneSpec

CONTAINER_WALL = 0.02


@dataclass(frozen=True)
class NoiseModel:
    depth_noise_rel: float = 0.02
    scale_error_rel: float = 0.05
    pose_trans_std: float = 0.02
    pose_rot_std: float = 0.01
    label_confusion_prob: float = 0.02
    detection_dropout_prob: float = 0.05
    min_pixels: int = 20

    def __post_init__(self) -> None:
        for name, v in self.__dict__.items():
            if v < 0:
                raise InvalidArgument(f"noise parameter {name} must be >= 0")
        if self.label_confusion_prob > 1 or self.detection_dropout_prob > 1:
            raise InvalidArgument("probabilities must be <= 1")

    @classmethod
    def zero(cls, min_pixels: int = 20) -> NoiseModel:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, min_pixels)


@dataclass(eq=False)
class RenderedView:
    detections: list[Detection]
    factored: FactoredView
    true_pose: Pose
    gt_depths: np.ndarray  # metric ray depths, inf where nothing was hit in range
    instance_ids: np.ndarray  # object index per pixel, -1 for structure, -2 for no hit

    def gt_points(self) -> np.ndarray:
        """Ground-truth first-hit points (world frame) of the valid pixels, raster order."""
        valid = self.factored.valid_mask
        cam = self.gt_depths[valid][:, None] * self.factored.rays[valid]
        return self.true_pose.apply(cam)


@dataclass(eq=False)
class RenderedBatch:
    views: list[RenderedView]
    anchor_pose: Pose  # known global pose of the batch's first view


@dataclass(frozen=True, eq=False)
class _Primitives:
    centers: np.ndarray
    cos: np.ndarray
    sin: np.ndarray
    half: np.ndarray
    instance: np.ndarray
    radius: np.ndarray


def _container_slabs(box) -> list[tuple[np.ndarray, np.ndarray]]:
    """Open-top container as bottom plate plus four side walls, in the box's local frame."""
    ex, ey, ez = box.extents
    t = CONTAINER_WALL
    local = [
        ((0.0, 0.0, -ez / 2 + t / 2), (ex, ey, t)),
        ((ex / 2 - t / 2, 0.0, 0.0), (t, ey, ez)),
        ((-ex / 2 + t / 2, 0.0, 0.0), (t, ey, ez)),
        ((0.0, ey / 2 - t / 2, 0.0), (ex, t, ez)),
        ((0.0, -ey / 2 + t / 2, 0.0), (ex, t, ez)),
    ]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    out = []
    for (u, v, w), ext in local:
        center = box.center + np.array([c * u - s * v, s * u + c * v, w])
        out.append((center, np.asarray(ext)))
    return out


def scene_primitives(scene: SceneSpec) -> _Primitives:
    cached = getattr(scene, "_primitives", None)
    if cached is not None:
        return cached
    catalog = default_priors().catalog
    centers, yaws, exts, inst = [], [], [], []
    (x0, y0, z0), (x1, y1, z1) = scene.bounds
    for cz in (z0 - 0.05, z1 + 0.05):  # floor and ceiling plates
        centers.append(np.array([(x0 + x1) / 2, (y0 + y1) / 2, cz]))
        yaws.append(0.0)
        exts.append(np.array([x1 - x0, y1 - y0, 0.1]))
        inst.append(-1)
    for w in scene.walls:
        b = w.as_box()
        centers.append(b.center)
        yaws.append(0.0)
        exts.append(b.extents)
        inst.append(-1)
    for k, obj in enumerate(scene.objects):
        if catalog[obj.label].shape == "open_top":
            for c, e in _container_slabs(obj.box):
                centers.append(c)
                yaws.append(obj.box.yaw)
                exts.append(e)
                inst.append(k)
        else:
            centers.append(obj.box.center)
            yaws.append(obj.box.yaw)
            exts.append(obj.box.extents)
            inst.append(k)
    half = np.array(exts) / 2
    prims = _Primitives(
        centers=np.array(centers),
        cos=np.cos(yaws),
        sin=np.sin(yaws),
        half=half,
        instance=np.array(inst),
        radius=np.linalg.norm(half, axis=1),
    )
    scene._primitives = prims
    return prims


def cast_scene_rays(scene: SceneSpec, origin: np.ndarray, dirs: np.ndarray, max_range: float) -> tuple[np.ndarray, np.ndarray]:
    """First-hit depth and instance id per world-frame unit ray (inf / -2 for misses)."""
    prims = scene_primitives(scene)
    rel = origin - prims.centers
    keep = np.linalg.norm(rel, axis=1) - prims.radius <= max_range
    c, s, h = prims.cos[keep], prims.sin[keep], prims.half[keep]
    rel = rel[keep]
    lo = np.stack([c * rel[:, 0] + s * rel[:, 1], -s * rel[:, 0] + c * rel[:, 1], rel[:, 2]], axis=1)
    dx, dy, dz = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
    tnear = np.full((len(dirs), len(c)), -np.inf)
    tfar = np.full((len(dirs), len(c)), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis, dl in enumerate((c * dx + s * dy, -s * dx + c * dy, np.broadcast_to(dz, (len(dirs), len(c))))):
            dl = np.where(dl == 0.0, 1e-30, dl)
            t1 = (-h[:, axis] - lo[:, axis]) / dl
            t2 = (h[:, axis] - lo[:, axis]) / dl
            np.maximum(tnear, np.minimum(t1, t2), out=tnear)
            np.minimum(tfar, np.maximum(t1, t2), out=tfar)
    hit = (tnear <= tfar) & (tnear > 1e-9)
    t = np.where(hit, tnear, np.inf)
    if t.shape[1] == 0:
        return np.full(len(dirs), np.inf), np.full(len(dirs), -2)
    j = np.argmin(t, axis=1)
    depth = t[np.arange(len(dirs)), j]
    inst = np.where(np.isfinite(depth), prims.instance[keep][j], -2)
    depth = np.where(depth <= max_range, depth, np.inf)
    inst = np.where(np.isfinite(depth), inst, -2)
    return depth, inst


def _check_in_bounds(scene: SceneSpec, pose: Pose) -> None:
    lo, hi = np.asarray(scene.bounds[0]), np.asarray(scene.bounds[1])
    if np.any(pose.translation < lo) or np.any(pose.translation > hi):
        raise InvalidArgument("render pose lies outside the scene bounds")


def _perturb(pose: Pose, noise: NoiseModel, rng: np.random.Generator) -> Pose:
    dt = rng.normal(0.0, 1.0, 3) * noise.pose_trans_std
    dr = rng.normal(0.0, 1.0, 3) * noise.pose_rot_std
    if noise.pose_trans_std == 0 and noise.pose_rot_std == 0:
        return pose
    return Pose(small_rotation(dr) @ pose.rotation, pose.translation + dt)


@lru_cache(maxsize=1)
def _vocab() -> tuple[str, ...]:
    return default_vocabulary()


def render_batch(
    scene: SceneSpec,
    poses: list[Pose],
    camera: CameraModel,
    noise: NoiseModel,
    step_seed: int,
    experiment_seed: int = 0,
    sources: list[Source] | None = None,
    dim: int = EMBED_DIM,
) -> RenderedBatch:
    """Render one inference batch; the metric scale error is drawn once for the batch.

    Relative poses are expressed in the first view's frame (the first one is the
    exact identity); the first view's global pose is the known anchor.
    """
    if not poses:
        raise InvalidArgument("batch needs at least one pose")
    for p in poses:
        _check_in_bounds(scene, p)
    sources = sources or [Source() for _ in poses]
    rng = np.random.default_rng([int(experiment_seed), int(step_seed)])
    rays = camera.ray_directions()
    casts = [cast_scene_rays(scene, p.translation, rays @ p.rotation.T, camera.max_range) for p in poses]

    finite = np.concatenate([d[np.isfinite(d)] for d, _ in casts])
    # power-of-two normaliser keeps (scale * depth / scale) bit-exact in noise-free mode
    true_scale = 2.0 ** round(math.log2(float(np.median(finite)))) if finite.size else 1.0
    metric_scale = true_scale * math.exp(rng.normal(0.0, 1.0) * noise.scale_error_rel)
    reference_inv = poses[0].inverse()
    vocab = _vocab()

    views = []
    for i, (pose, (depth, inst)) in enumerate(zip(poses, casts)):
        valid = np.isfinite(depth)
        eps = rng.normal(0.0, 1.0, len(depth)) * noise.depth_noise_rel
        factor = np.maximum(1.0 + eps, 0.05)
        depths = np.where(valid, depth * factor / true_scale, 1.0)
        if i == 0:
            rel = Pose.identity()
        else:
            rel = _perturb(reference_inv.compose(pose), noise, rng)
        fv = FactoredView(rays=rays, depths=depths, relative_pose=rel, metric_scale=metric_scale, valid_mask=valid)

        detections = []
        ids, counts = np.unique(inst[valid & (inst >= 0)], return_counts=True)
        for obj_id, n in zip(ids, counts):
            drop_u, conf_u, conf_pick = rng.random(), rng.random(), rng.random()
            if n < noise.min_pixels or drop_u < noise.detection_dropout_prob:
                continue
            label = scene.objects[obj_id].label
            if conf_u < noise.label_confusion_prob:
                others = [v for v in vocab if v != label]
                label = others[int(conf_pick * len(others))]
            pix = np.flatnonzero(valid & (inst == obj_id))
            detections.append(
                Detection(
                    label=label,
                    embedding=embed_label(label, dim, experiment_seed),
                    points_camera=fv.camera_points(pix),
                    source=sources[i],
                    pixels=pix,
                )
            )
        views.append(RenderedView(detections, fv, pose, np.where(valid, depth, np.inf), inst))
    return RenderedBatch(views, poses[0])


def render_view(
    scene: SceneSpec,
    pose: Pose,
    camera: CameraModel,
    noise: NoiseModel,
    step_seed: int,
    experiment_seed: int = 0,
) -> tuple[list[Detection], FactoredView, Pose]:
    """Single-view batch: detections, factored geometry and the true pose."""
    view = render_batch(scene, [pose], camera, noise, step_seed, experiment_seed).views[0]
    return view.detections, view.factored, view.true_pose


def visible_objects(scene: SceneSpec, pose: Pose, camera: CameraModel, min_pixels: int = 20) -> set[int]:
    """Indices of objects covering at least ``min_pixels`` first-hit pixels from ``pose``."""
    rays = camera.ray_directions()
    _, inst = cast_scene_rays(scene, pose.translation, rays @ pose.rotation.T, camera.max_range)
    ids, counts = np.unique(inst[inst >= 0], return_counts=True)
    return {int(i) for i, n in zip(ids, counts) if n >= min_pixels}
