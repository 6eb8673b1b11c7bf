from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from activesg.errors import InvalidArgument
from activesg.geometry.pose import Pose


@dataclass(frozen=True, eq=False)
class FactoredView:
    """Per-view factored geometry: unit rays, up-to-scale depths, batch-relative pose, shared scale."""

    rays: np.ndarray
    depths: np.ndarray
    relative_pose: Pose
    metric_scale: float
    valid_mask: np.ndarray

    def validate(self) -> None:
        if not self.metric_scale > 0:
            raise InvalidArgument("metric_scale must be positive")
        rays = np.asarray(self.rays)
        valid = np.asarray(self.valid_mask, dtype=bool)
        if rays.shape != (valid.size, 3) or np.shape(self.depths) != (valid.size,):
            raise InvalidArgument("rays/depths/valid_mask shapes disagree")
        r = rays[valid]
        if r.size and np.max(np.abs(np.linalg.norm(r, axis=1) - 1.0)) > 1e-9:
            raise InvalidArgument("non-unit ray direction on a valid pixel")
        d = np.asarray(self.depths)[valid]
        if d.size and not np.all(d > 0):
            raise InvalidArgument("non-positive depth on a valid pixel")

    def camera_points(self, pixels: np.ndarray | None = None) -> np.ndarray:
        """Metric points in this view's camera frame for ``pixels`` (default: all valid pixels)."""
        if pixels is None:
            pixels = np.flatnonzero(self.valid_mask)
        # scale * depth first: keeps the product exact for power-of-two normalisation
        metric = self.metric_scale * np.asarray(self.depths)[pixels]
        return metric[:, None] * np.asarray(self.rays)[pixels]


def compose_backprojection(view: FactoredView) -> np.ndarray:
    """Back-project every valid pixel into the batch reference frame, raster order."""
    view.validate()
    return view.relative_pose.apply(view.camera_points())
