from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from activesg.errors import InvalidArgument


@dataclass(frozen=True)
class CameraModel:
    horizontal_fov: float = math.pi / 2
    width: int = 64
    height: int = 48
    max_range: float = 6.0

    def __post_init__(self) -> None:
        if not 0.0 < self.horizontal_fov < math.pi:
            raise InvalidArgument("horizontal_fov must lie in (0, pi)")
        if self.width < 8 or self.height < 8:
            raise InvalidArgument("ray grid must be at least 8x8")
        if self.max_range <= 0:
            raise InvalidArgument("max_range must be positive")

    @property
    def num_rays(self) -> int:
        return self.width * self.height

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions in the camera frame, row-major pixel order. Read-only."""
        return _rays(self.horizontal_fov, self.width, self.height)


@lru_cache(maxsize=16)
def _rays(fov: float, width: int, height: int) -> np.ndarray:
    f = (width / 2.0) / math.tan(fov / 2.0)
    u = (np.arange(width) + 0.5 - width / 2.0) / f
    v = (np.arange(height) + 0.5 - height / 2.0) / f
    uu, vv = np.meshgrid(u, v)
    d = np.stack([uu.ravel(), vv.ravel(), np.ones(width * height)], axis=1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d.setflags(write=False)
    return d
