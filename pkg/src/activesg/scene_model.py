"""Core scene-graph value types and deterministic label embeddings."""

from __future__ import annotations

import copy
import enum
import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from activesg.errors import InvalidArgument
from activesg.geometry.boxes import OrientedBox

EMBED_DIM = 64
PREDICATES = ("on_top_of", "supports", "under", "over", "inside", "next_to")


def embed_label(label: str, dim: int = EMBED_DIM, experiment_seed: int = 0) -> np.ndarray:
    """Unit vector drawn from a generator keyed on ``(experiment_seed, label)``.

    Returned arrays are read-only and shared between calls.
    """
    if not label:
        raise InvalidArgument("label must be non-empty")
    if dim < 8:
        raise InvalidArgument("embedding dim must be >= 8")
    return _embed(label, int(dim), int(experiment_seed))


@lru_cache(maxsize=4096)
def _embed(label: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    key = int.from_bytes(digest[:16], "little")
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, key])
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"embedding dimension mismatch: {a.shape} vs {b.shape}")
    c = float(a @ b)
    if c > 1.0 - 1e-9 and np.array_equal(a, b):
        return 1.0  # exact for identical unit vectors despite rounding
    return min(1.0, max(-1.0, c))


def normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


class SourceKind(str, enum.Enum):
    ONBOARD = "onboard"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Source:
    kind: SourceKind = SourceKind.ONBOARD
    camera_index: int | None = None

    @classmethod
    def external(cls, index: int) -> Source:
        return cls(SourceKind.EXTERNAL, index)


@dataclass(eq=False)
class Detection:
    """One segmented object observation lifted to 3D in its camera frame."""

    label: str
    embedding: np.ndarray
    points_camera: np.ndarray
    source: Source = field(default_factory=Source)
    pixels: np.ndarray | None = None  # flat pixel indices of the mask

    def __post_init__(self) -> None:
        pts = np.asarray(self.points_camera, dtype=float).reshape(-1, 3)
        if len(pts) == 0:
            raise InvalidArgument("detection has no points")
        if not np.all(pts[:, 2] > 0):
            raise InvalidArgument("detection points must have positive depth")
        self.points_camera = pts


@dataclass(eq=False)
class ObjectNode:
    id: int
    label_votes: dict[str, int]
    embedding: np.ndarray
    points: np.ndarray
    box: OrientedBox
    detection_count: int

    @property
    def label(self) -> str:
        # argmax of votes, ties broken lexicographically
        return min(self.label_votes.items(), key=lambda kv: (-kv[1], kv[0]))[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def check(self) -> None:
        if self.detection_count != sum(self.label_votes.values()):
            raise AssertionError(f"node {self.id}: detection_count != total votes")
        if len(self.points) == 0:
            raise AssertionError(f"node {self.id}: no points")
        if abs(np.linalg.norm(self.embedding) - 1.0) > 1e-9:
            raise AssertionError(f"node {self.id}: embedding not unit norm")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "label_votes": dict(sorted(self.label_votes.items())),
            "centroid": self.centroid.tolist(),
            "box": self.box.to_dict(),
            "detection_count": self.detection_count,
        }


@dataclass(frozen=True, order=True)
class RelationEdge:
    source_id: int
    target_id: int
    predicate: str

    def __post_init__(self) -> None:
        if self.source_id == self.target_id:
            raise InvalidArgument("relation edge endpoints must differ")
        if self.predicate not in PREDICATES:
            raise InvalidArgument(f"unknown predicate {self.predicate!r}")


class SceneGraph:
    """Object nodes plus directed relation edges; ids come from a monotone counter."""

    def __init__(self) -> None:
        self.nodes: dict[int, ObjectNode] = {}
        self._edges: dict[tuple[int, int], RelationEdge] = {}
        self.step = 0
        self._next_id = 0

    @property
    def edges(self) -> list[RelationEdge]:
        return sorted(self._edges.values())

    def __len__(self) -> int:
        return len(self.nodes)

    def new_id(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def add_node(self, node: ObjectNode) -> None:
        if node.id in self.nodes:
            raise InvalidArgument(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        self._next_id = max(self._next_id, node.id + 1)

    def remove_node(self, node_id: int) -> None:
        del self.nodes[node_id]
        self._edges = {k: e for k, e in self._edges.items() if node_id not in k}

    def set_edges(self, edges: Iterable[RelationEdge]) -> None:
        table: dict[tuple[int, int], RelationEdge] = {}
        for e in edges:
            key = (e.source_id, e.target_id)
            if key in table:
                raise InvalidArgument(f"second edge for ordered pair {key}")
            if e.source_id not in self.nodes or e.target_id not in self.nodes:
                raise InvalidArgument(f"edge {key} references a missing node")
            table[key] = e
        self._edges = table

    def sorted_nodes(self) -> list[ObjectNode]:
        return [self.nodes[k] for k in sorted(self.nodes)]

    def labels(self) -> list[str]:
        return [n.label for n in self.sorted_nodes()]

    def snapshot(self) -> SceneGraph:
        return copy.deepcopy(self)

    def check(self) -> None:
        for n in self.nodes.values():
            n.check()
        for (s, t), e in self._edges.items():
            assert s != t and s in self.nodes and t in self.nodes, e

    def to_dict(self) -> dict:
        return {
            "nodes": [n.to_dict() for n in self.sorted_nodes()],
            "edges": [{"source": e.source_id, "target": e.target_id, "predicate": e.predicate} for e in self.edges],
            "step": self.step,
        }

    @classmethod
    def from_dict(cls, d: dict, dim: int = EMBED_DIM, experiment_seed: int = 0) -> SceneGraph:
        """Rebuild a graph from its export.

        The export carries no points or embeddings: points are replaced by the
        box corners and embeddings are re-derived from the display label.
        """
        g = cls()
        for nd in d["nodes"]:
            box = OrientedBox.from_dict(nd["box"])
            votes = {str(k): int(v) for k, v in nd["label_votes"].items()}
            g.add_node(
                ObjectNode(
                    id=int(nd["id"]),
                    label_votes=votes,
                    embedding=np.array(embed_label(nd["label"], dim, experiment_seed)),
                    points=box_corners(box),
                    box=box,
                    detection_count=int(nd["detection_count"]),
                )
            )
        g.set_edges(RelationEdge(int(e["source"]), int(e["target"]), e["predicate"]) for e in d.get("edges", []))
        g.step = int(d.get("step", 0))
        return g


def box_corners(box: OrientedBox) -> np.ndarray:
    fp = np.array(box.footprint())
    lo = np.column_stack([fp, np.full(4, box.zmin)])
    hi = np.column_stack([fp, np.full(4, box.zmax)])
    return np.vstack([lo, hi])
