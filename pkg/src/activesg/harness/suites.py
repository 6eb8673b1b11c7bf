"""Shipped experiment suites: lists of seeded scene/start configurations."""

from __future__ import annotations

from pathlib import Path

from activesg.errors import InvalidArgument
from activesg.harness.config import ExperimentConfig, SceneRef

SUITES: dict[str, list[tuple[str, int]]] = {
    "apartment": [("apartment", s) for s in range(10)],
    "furnished": [("furnished_room", s) for s in range(10)],
    # four apartments and three furnished rooms
    "standard": [("apartment", s) for s in range(4)] + [("furnished_room", s) for s in range(3)],
}


def suite_configs(name: str, base: ExperimentConfig | None = None, out_root: str | Path | None = None) -> list[ExperimentConfig]:
    """One config per suite member; scene seed doubles as experiment seed."""
    if name not in SUITES:
        raise InvalidArgument(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    out = []
    for template, seed in SUITES[name]:
        ref = SceneRef(template=template, seed=seed)
        cfg = ExperimentConfig(scene=ref) if base is None else base.replace(scene=ref)
        tag = f"{template}-{seed}-{cfg.planner.planner}"
        out_dir = None if out_root is None else str(Path(out_root) / tag)
        out.append(cfg.replace(experiment_seed=seed, output_dir=out_dir))
    return out
