from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from activesg.errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform mapping a local (camera) frame into a parent frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, t: Sequence[float]) -> Pose:
        return cls(np.eye(3), np.asarray(t, dtype=float))

    @classmethod
    def look(cls, position: Sequence[float], yaw: float, pitch: float = 0.0) -> Pose:
        """Camera pose at ``position`` heading ``yaw`` (about +z) and tilted down by ``pitch``.

        Camera frame convention: x right, y down, z forward.
        """
        cy, sy = math.cos(yaw), math.sin(yaw)
        cp, sp = math.cos(pitch), math.sin(pitch)
        forward = np.array([cy * cp, sy * cp, -sp])
        right = np.array([sy, -cy, 0.0])
        down = np.cross(forward, right)
        return cls(np.column_stack([right, down, forward]), np.asarray(position, dtype=float))

    def check(self, tol: float = 1e-9) -> None:
        r = self.rotation
        if not np.allclose(r @ r.T, np.eye(3), atol=tol) or abs(np.linalg.det(r) - 1.0) > tol:
            raise InvalidArgument("rotation is not a proper orthonormal matrix")

    def compose(self, other: Pose) -> Pose:
        """Return ``self ∘ other`` (apply ``other`` first)."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> Pose:
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return pts @ self.rotation.T + self.translation

    def is_identity(self, tol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, np.eye(3), atol=tol, rtol=0.0)
            and np.allclose(self.translation, 0.0, atol=tol, rtol=0.0)
        )

    def allclose(self, other: Pose, tol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=tol, rtol=0.0)
            and np.allclose(self.translation, other.translation, atol=tol, rtol=0.0)
        )

    @property
    def position(self) -> np.ndarray:
        return self.translation

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> Pose:
        if "rotation" in d:
            return cls(np.asarray(d["rotation"], dtype=float), np.asarray(d["translation"], dtype=float))
        # compact camera form: position + yaw (+ pitch)
        return cls.look(d["position"], float(d.get("yaw", 0.0)), float(d.get("pitch", 0.0)))


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def small_rotation(rotvec: np.ndarray) -> np.ndarray:
    """Rodrigues formula for an axis-angle vector."""
    theta = float(np.linalg.norm(rotvec))
    if theta == 0.0:
        return np.eye(3)
    k = np.asarray(rotvec, dtype=float) / theta
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * kx + (1.0 - math.cos(theta)) * (kx @ kx)


def anchor_poses(first_view_global: Pose, relative_poses: list[Pose]) -> list[Pose]:
    """Express batch-relative poses in the global frame given the first view's global pose."""
    if not relative_poses:
        raise InvalidArgument("relative_poses must be non-empty")
    if not relative_poses[0].is_identity():
        raise InvalidArgument("first relative pose must be the identity (batch reference frame)")
    out = [first_view_global]
    out.extend(first_view_global.compose(p) for p in relative_poses[1:])
    return out
