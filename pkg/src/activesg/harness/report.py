"""Aggregate per-run ``steps.csv`` files into mean/std curves per planner."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Iterable

import numpy as np

from activesg.evaluation import read_steps_csv

METRICS = ("nodes_pred", "precision", "recall", "f1", "travel_m")
REPORT_HEADER = ["planner", "step", "runs"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]


def find_step_files(paths: Iterable[str | Path]) -> list[Path]:
    out: list[Path] = []
    for p in map(Path, paths):
        if p.is_file():
            out.append(p)
        else:
            out.extend(sorted(p.rglob("steps.csv")))
    return out


def aggregate(files: Iterable[str | Path]) -> dict[tuple[str, int], dict[str, np.ndarray]]:
    """``(planner, step) -> {metric: values across runs}``."""
    bucket: dict[tuple[str, int], dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for f in files:
        for row in read_steps_csv(f):
            key = (row["planner"], int(row["step"]))
            for m in METRICS:
                bucket[key][m].append(float(row[m]))
    return {k: {m: np.asarray(v) for m, v in d.items()} for k, d in bucket.items()}


def report_csv(agg: dict[tuple[str, int], dict[str, np.ndarray]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for planner, step in sorted(agg):
        d = agg[(planner, step)]
        row = [planner, str(step), str(len(d["f1"]))]
        for m in METRICS:
            row += [f"{d[m].mean():.6f}", f"{d[m].std():.6f}"]
        w.writerow(row)
    return buf.getvalue()


def write_report(paths: Iterable[str | Path], out: str | Path | None = None) -> str:
    files = find_step_files(paths)
    if not files:
        raise FileNotFoundError("no steps.csv files found")
    text = report_csv(aggregate(files))
    if out is not None:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    return text
