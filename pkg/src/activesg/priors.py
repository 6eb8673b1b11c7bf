"""Loaders for the shipped label vocabulary and room/label priors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from activesg.errors import ConfigurationError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class LabelInfo:
    size: tuple[float, float, float]
    placement: str  # floor | support | contained
    support_surface: bool
    shape: str  # solid | open_top


@dataclass(frozen=True)
class RoomPrior:
    prior: float
    count_range: tuple[int, int]
    nominal_area_m2: float
    label_weights: dict[str, float]

    def label_prob(self, label: str, smoothing: float) -> float:
        total = sum(self.label_weights.values())
        return self.label_weights.get(label, 0.0) / total + smoothing


@dataclass(frozen=True)
class Priors:
    room_types: dict[str, RoomPrior]
    catalog: dict[str, LabelInfo]
    smoothing: float

    def room_posterior(self, labels: list[str]) -> dict[str, float]:
        """Naive-Bayes posterior over room types given observed node labels."""
        logs = {}
        for name, room in self.room_types.items():
            lp = math.log(room.prior)
            for lab in labels:
                lp += math.log(room.label_prob(lab, self.smoothing))
            logs[name] = lp
        top = max(logs.values())
        w = {k: math.exp(v - top) for k, v in logs.items()}
        z = sum(w.values())
        return {k: v / z for k, v in w.items()}

    def floor_labels(self, room_type: str) -> tuple[list[str], list[float]]:
        weights = self.room_types[room_type].label_weights
        labels = sorted(k for k in weights if self.catalog[k].placement == "floor")
        return labels, [weights[k] for k in labels]


def _asset(name: str) -> Path:
    return Path(str(resources.files("activesg") / "assets" / name))


def load_vocabulary(path: str | Path | None = None) -> list[str]:
    """Read a newline-delimited label list whose header declares the format version."""
    p = Path(path) if path else _asset("labels.txt")
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read vocabulary {p}: {exc}") from exc
    if not lines or not lines[0].startswith("# format_version:"):
        raise ConfigurationError(f"{p}:1: missing '# format_version:' header")
    version = int(lines[0].split(":", 1)[1])
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"{p}:1: unsupported format_version {version}")
    labels = [ln.strip() for ln in lines[1:] if ln.strip() and not ln.startswith("#")]
    if len(set(labels)) != len(labels):
        raise ConfigurationError(f"{p}: duplicate labels")
    return labels


def load_priors(path: str | Path | None = None) -> Priors:
    p = Path(path) if path else _asset("priors.json")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read priors {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        if raw["format_version"] != FORMAT_VERSION:
            raise ConfigurationError(f"{p}: unsupported format_version {raw['format_version']}")
        catalog = {
            k: LabelInfo(tuple(v["size"]), v["placement"], bool(v["support_surface"]), v["shape"])
            for k, v in raw["catalog"].items()
        }
        rooms = {
            k: RoomPrior(float(v["prior"]), tuple(v["count_range"]), float(v["nominal_area_m2"]), dict(v["labels"]))
            for k, v in raw["room_types"].items()
        }
        smoothing = float(raw["smoothing"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{p}: invalid priors file ({exc!r})") from exc
    for name, room in rooms.items():
        unknown = set(room.label_weights) - set(catalog)
        if unknown:
            raise ConfigurationError(f"{p}: room {name} references unknown labels {sorted(unknown)}")
        if room.prior <= 0 or room.count_range[0] > room.count_range[1]:
            raise ConfigurationError(f"{p}: room {name} has an invalid prior or count range")
    return Priors(rooms, catalog, smoothing)


@lru_cache(maxsize=1)
def default_priors() -> Priors:
    return load_priors()


@lru_cache(maxsize=1)
def default_vocabulary() -> tuple[str, ...]:
    return tuple(load_vocabulary())
