"""Command line entry point: ``activesg {gen-scene,run,suite,eval,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from activesg.errors import ConfigurationError, GenerationFailure, InvalidArgument, SceneError, SceneUnnavigable
from activesg.evaluation import MatchThresholds, match_nodes, compute_metrics
from activesg.exploration.planner import PLANNERS, PlannerConfig
from activesg.geometry.pose import Pose
from activesg.harness.config import ExperimentConfig, load_config, parse_camera_preset
from activesg.harness.report import write_report
from activesg.harness.runner import run_experiment
from activesg.harness.suites import SUITES, suite_configs
from activesg.scene_model import SceneGraph
from activesg.simulator.scenes import TEMPLATES, SceneSpec, generate_scene

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENE = 3

log = logging.getLogger("activesg")


def _external_cameras(value: str) -> str | tuple[Pose, ...]:
    try:
        parse_camera_preset(value)
        return value
    except InvalidArgument:
        pass
    path = Path(value)
    if not path.is_file():
        raise ConfigurationError(f"--external-cams: {value!r} is neither a preset (overhead:N) nor a file")
    from activesg._jsonio import load_json

    raw = load_json(path)
    try:
        return tuple(Pose.from_dict(p) for p in raw["cameras"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: expected {{\"cameras\": [pose, ...]}} ({exc})") from exc


def _apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    changes = {}
    if args.seed is not None:
        changes["experiment_seed"] = args.seed
    if args.planner is not None:
        changes["planner"] = PlannerConfig(args.planner, cfg.planner.num_samples)
    if args.steps is not None:
        changes["steps"] = args.steps
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.external_cams is not None:
        changes["external_cameras"] = _external_cameras(args.external_cams)
    if args.remote_sampler is not None:
        changes["remote_sampler"] = args.remote_sampler
    try:
        return cfg.replace(**changes)
    except InvalidArgument as exc:
        raise ConfigurationError(str(exc)) from exc


def _summary(records) -> str:
    last = records[-1]
    return (
        f"steps={last.step} nodes={last.nodes_pred}/{last.nodes_gt} "
        f"precision={last.precision:.3f} recall={last.recall:.3f} f1={last.f1:.3f}"
    )


def cmd_gen_scene(args: argparse.Namespace) -> int:
    scene = generate_scene(args.template, args.seed)
    scene.save(args.out)
    print(f"wrote {args.out}: {len(scene.objects)} objects, {len(scene.rooms)} rooms")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = run_experiment(cfg)
    print(_summary(result.records) + (f" out={cfg.output_dir}" if cfg.output_dir else ""))
    return EXIT_OK


def cmd_suite(args: argparse.Namespace) -> int:
    base = load_config(args.config) if args.config else ExperimentConfig(scene=_placeholder_scene())
    base = _apply_overrides(base, argparse.Namespace(**{**vars(args), "seed": None, "out": None}))
    for cfg in suite_configs(args.suite, base, args.out):
        result = run_experiment(cfg)
        print(f"{cfg.scene.template}-{cfg.scene.seed}: {_summary(result.records)}")
    return EXIT_OK


def _placeholder_scene():
    from activesg.harness.config import SceneRef

    return SceneRef(template="apartment", seed=0)


def cmd_eval(args: argparse.Namespace) -> int:
    from activesg._jsonio import load_json

    scene = SceneSpec.load(args.scene)
    graph = SceneGraph.from_dict(load_json(args.graph), experiment_seed=args.seed)
    th = MatchThresholds(args.min_semantic, args.max_centroid_dist)
    m = match_nodes(graph, scene, th, args.seed)
    p, r, f = compute_metrics(m, len(graph), len(scene.objects))
    print(json.dumps({"nodes_pred": len(graph), "nodes_gt": len(scene.objects), "matched": len(m),
                      "precision": round(p, 6), "recall": round(r, 6), "f1": round(f, 6)}))
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    text = write_report(args.dirs, args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {args.out}")
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser, config_required: bool) -> None:
    p.add_argument("--config", required=config_required, help="experiment JSON file")
    p.add_argument("--planner", choices=PLANNERS, help="override the configured planner")
    p.add_argument("--steps", type=int, help="override the number of exploration steps")
    p.add_argument("--out", help="output directory")
    p.add_argument("--external-cams", help="preset such as overhead:1, or a JSON file of poses")
    p.add_argument("--remote-sampler", metavar="URL", help="HTTP completion sampler")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activesg", description="Active RGB-only 3D scene-graph simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate a procedural scene file")
    p.add_argument("template", choices=TEMPLATES)
    p.add_argument("seed", type=int)
    p.add_argument("out")
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("run", help="run one experiment from a config file")
    _add_run_flags(p, True)
    p.add_argument("--seed", type=int, help="override experiment_seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run a shipped seeded suite")
    p.add_argument("suite", choices=sorted(SUITES))
    _add_run_flags(p, False)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("eval", help="score an exported graph against a scene")
    p.add_argument("graph")
    p.add_argument("scene")
    p.add_argument("--min-semantic", type=float, default=MatchThresholds.min_semantic)
    p.add_argument("--max-centroid-dist", type=float, default=MatchThresholds.max_centroid_dist)
    p.add_argument("--seed", type=int, default=0, help="experiment seed used for label embeddings")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="aggregate steps.csv files into per-planner curves")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", help="aggregate CSV path (default: stdout)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SceneError, GenerationFailure, SceneUnnavigable) as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        return EXIT_SCENE
    except (ConfigurationError, InvalidArgument, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
