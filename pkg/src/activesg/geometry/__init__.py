from activesg.geometry.boxes import (
    OrientedBox,
    box_iou,
    containment_fraction,
    fit_oriented_box,
    footprint_gap,
    footprint_overlap,
    intersection_volume,
)
from activesg.geometry.camera import CameraModel
from activesg.geometry.factored import FactoredView, compose_backprojection
from activesg.geometry.pose import Pose, anchor_poses
from activesg.geometry.voxels import (
    FREE,
    OCCUPIED,
    UNKNOWN,
    VoxelGrid,
    integrate_scan,
    visible_cells,
)

__all__ = [
    "CameraModel",
    "FactoredView",
    "FREE",
    "OCCUPIED",
    "OrientedBox",
    "Pose",
    "UNKNOWN",
    "VoxelGrid",
    "anchor_poses",
    "box_iou",
    "compose_backprojection",
    "containment_fraction",
    "fit_oriented_box",
    "footprint_gap",
    "footprint_overlap",
    "integrate_scan",
    "intersection_volume",
    "visible_cells",
]
