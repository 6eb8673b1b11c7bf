"""Node-level evaluation against ground truth and the per-step CSV log."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from activesg.errors import InvalidArgument
from activesg.scene_model import SceneGraph, embed_label
from activesg.simulator.scenes import SceneSpec

CSV_HEADER = "step,planner,nodes_pred,nodes_gt,precision,recall,f1,selected_viewpoint,selected_score,travel_m,wall_ms"


@dataclass(frozen=True)
class MatchThresholds:
    min_semantic: float = 0.85
    max_centroid_dist: float = 0.50

    def __post_init__(self) -> None:
        if not 0.0 < self.min_semantic <= 1.0:
            raise InvalidArgument("min_semantic must lie in (0, 1]")
        if self.max_centroid_dist <= 0:
            raise InvalidArgument("max_centroid_dist must be positive")


def candidate_pairs(
    pred: SceneGraph, gt: SceneSpec, th: MatchThresholds, experiment_seed: int = 0
) -> list[tuple[float, float, int, int]]:
    """All gate-passing pairs as ``(cosine, distance, pred_id, gt_index)``."""
    nodes = pred.sorted_nodes()
    if not nodes or not gt.objects:
        return []
    dim = len(nodes[0].embedding)
    gt_emb = np.stack([embed_label(o.label, dim, experiment_seed) for o in gt.objects])
    gt_ctr = np.stack([o.box.center for o in gt.objects])
    pairs = []
    for n in nodes:
        e = np.asarray(n.embedding, dtype=float)
        cos = np.clip(gt_emb @ (e / np.linalg.norm(e)), -1.0, 1.0)
        dist = np.linalg.norm(gt_ctr - n.box.center, axis=1)
        for g in np.flatnonzero((cos >= th.min_semantic) & (dist <= th.max_centroid_dist)):
            pairs.append((float(cos[g]), float(dist[g]), n.id, int(g)))
    return pairs


def _max_matching_size(pairs: list[tuple[int, int]]) -> int:
    if not pairs:
        return 0
    rows = {p: i for i, p in enumerate(sorted({p for p, _ in pairs}))}
    cols = {g: j for j, g in enumerate(sorted({g for _, g in pairs}))}
    m = csr_matrix(
        (np.ones(len(pairs)), ([rows[p] for p, _ in pairs], [cols[g] for _, g in pairs])),
        shape=(len(rows), len(cols)),
    )
    return int(np.count_nonzero(maximum_bipartite_matching(m, perm_type="column") >= 0))


def greedy_matching(ordered: list[tuple[int, int]]) -> dict[int, int]:
    """Accept pairs in order, skipping any whose pred or gt is already used."""
    used_gt: set[int] = set()
    out: dict[int, int] = {}
    for pid, g in ordered:
        if pid in out or g in used_gt:
            continue
        used_gt.add(g)
        out[pid] = g
    return out


def match_nodes(
    pred: SceneGraph, gt: SceneSpec, th: MatchThresholds = MatchThresholds(), experiment_seed: int = 0
) -> dict[int, int]:
    """One-to-one matching in greedy order: descending cosine, nearer centroid, smaller pred id.

    When plain greedy leaves a larger matching on the table, a pair is only
    accepted if a maximum-cardinality matching containing every accepted pair
    still exists. The result is therefore the greedy one whenever greedy is
    already maximum, and otherwise the first maximum matching in greedy order.
    """
    pairs = sorted(candidate_pairs(pred, gt, th, experiment_seed), key=lambda p: (-p[0], p[1], p[2], p[3]))
    ordered = [(pid, g) for _, _, pid, g in pairs]
    out = greedy_matching(ordered)
    target = _max_matching_size(ordered)
    if len(out) == target:
        return out
    out = {}
    used_gt: set[int] = set()
    for pid, g in ordered:
        if pid in out or g in used_gt:
            continue
        rest = [(p, h) for p, h in ordered if p != pid and h != g and p not in out and h not in used_gt]
        if len(out) + 1 + _max_matching_size(rest) == target:
            out[pid] = g
            used_gt.add(g)
    return out


def compute_metrics(matching: dict | int, n_pred: int, n_gt: int) -> tuple[float, float, float]:
    m = matching if isinstance(matching, int) else len(matching)
    if n_gt <= 0:
        raise InvalidArgument("ground truth must contain at least one object")
    if m > min(n_pred, n_gt):
        raise InvalidArgument("matching is larger than min(n_pred, n_gt)")
    precision = m / n_pred if n_pred else 0.0
    recall = m / n_gt
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def evaluate_graph(
    pred: SceneGraph, gt: SceneSpec, th: MatchThresholds = MatchThresholds(), experiment_seed: int = 0
) -> tuple[float, float, float]:
    return compute_metrics(match_nodes(pred, gt, th, experiment_seed), len(pred), len(gt.objects))


@dataclass(frozen=True)
class StepRecord:
    step: int
    planner: str
    nodes_pred: int
    nodes_gt: int
    precision: float
    recall: float
    f1: float
    selected_viewpoint: int
    selected_score: float
    travel_m: float
    wall_ms: float

    def __post_init__(self) -> None:
        for v in (self.precision, self.recall, self.f1):
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument("metrics must lie in [0, 1]")

    def row(self) -> list[str]:
        return [
            str(self.step),
            self.planner,
            str(self.nodes_pred),
            str(self.nodes_gt),
            f"{self.precision:.6f}",
            f"{self.recall:.6f}",
            f"{self.f1:.6f}",
            str(self.selected_viewpoint),
            f"{self.selected_score:.6f}",
            f"{self.travel_m:.6f}",
            f"{self.wall_ms:.3f}",
        ]


assert ",".join(f.name for f in fields(StepRecord)) == CSV_HEADER


def steps_csv(records: Iterable[StepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def write_steps_csv(path: str | Path, records: Iterable[StepRecord]) -> None:
    Path(path).write_text(steps_csv(records), encoding="utf-8", newline="\n")


def read_steps_csv(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if ",".join(reader.fieldnames or []) != CSV_HEADER:
            raise InvalidArgument(f"{path}: unexpected CSV header")
        return list(reader)

