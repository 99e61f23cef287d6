"""Command-line entry point: ``textlink <command> ...``.

Commands: synth, train, infer, eval, render, gradcheck, ablate. Set
``TEXTLINK_LOG`` (e.g. ``INFO`` or ``DEBUG``) for progress output.
"""
import argparse
from dataclasses import asdict, fields
import json
import logging
import os
from pathlib import Path
import sys
import time
from typing import List, Optional, Sequence

import numpy as np

from textlink import kernels
from textlink.data import samples_from_scenes
from textlink.evaluation import (
    aggregate,
    detect_baseline,
    evaluate_scene,
    format_table,
    match_instances,
)
from textlink.features import EmbeddingConfig, FeatureProvider
from textlink.gcn import (
    DEFAULT_HIDDEN,
    GcnModel,
    ModelLoadError,
    OptimizerConfig,
    evaluate_accuracy,
    load_model,
    save_model,
    train,
)
from textlink.gradcheck import run_gradcheck
from textlink.graph import NeighborIndex, build_local_graph
from textlink.inference import DetectConfig, detect, detections_to_json
from textlink.render import render_svg
from textlink.synth import (
    GeneratorConfig,
    NoiseModel,
    generate_scene,
    load_scene,
    perturb_components,
    save_scene,
)

logger = logging.getLogger("textlink")


class CliError(Exception):
    pass


def _dump(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _scene_files(path) -> List[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("scene_*.json"))
        if not files:
            raise CliError(f"no scene_*.json files in {p}")
        return files
    if not p.exists():
        raise CliError(f"no such file: {p}")
    return [p]


def _load_config(path: Optional[str], cls):
    if not path:
        return None, None
    d = json.loads(Path(path).read_text())
    if "seed" not in d:
        raise CliError(f"config file {path} must set 'seed'")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names - {"seed"}
    if unknown:
        raise CliError(f"unknown keys in {path}: {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in names}
    return cls(**kw), int(d["seed"])


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    gen, cfg_seed = _load_config(args.config, GeneratorConfig)
    if gen is None:
        gen = GeneratorConfig.adversarial() if args.adversarial else GeneratorConfig()
    seed = cfg_seed if cfg_seed is not None else args.seed
    noise = NoiseModel.zero() if args.noise == "none" else NoiseModel()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for k in range(args.scenes):
        s = seed * 100003 + k
        scene = generate_scene(gen, s)
        scene.components = perturb_components(scene.components, noise, seed=s + 7919, scene=scene)
        name = f"scene_{k:04d}.json"
        save_scene(scene, out / name)
        names.append(name)
    _dump({"seed": seed, "scenes": names, "generator": asdict(gen), "noise": asdict(noise)},
          out / "manifest.json")
    print(f"wrote {len(names)} scenes to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = EmbeddingConfig(args.c_eps)
    scenes = (load_scene(f) for f in _scene_files(args.data))
    samples = samples_from_scenes(scenes, args.max_graphs, cfg=cfg, xi=args.xi)
    if not samples:
        raise CliError("no usable training graphs in the data directory")
    n_eval = int(len(samples) * args.holdout)
    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(len(samples))
    eval_set = [samples[i] for i in perm[:n_eval]]
    train_set = [samples[i] for i in perm[n_eval:]]
    hidden = tuple(int(v) for v in args.hidden.split(","))
    model = GcnModel.init(cfg.geometric_dim, hidden, seed=args.seed, c_eps=args.c_eps)
    opt = OptimizerConfig(kind=args.optimizer, lr=args.lr, weight_decay=args.weight_decay)
    t0 = time.time()
    state = train(model, train_set, args.epochs, seed=args.seed, batch_size=args.batch_size,
                  optimizer=opt)
    save_model(model, args.out)
    metrics = {
        "seed": args.seed, "graphs": len(samples), "train_graphs": len(train_set),
        "eval_graphs": len(eval_set), "epochs": args.epochs, "optimizer": asdict(opt),
        "history": state.history,
        "eval_accuracy": evaluate_accuracy(model, eval_set) if eval_set else None,
    }
    if args.metrics:
        _dump(metrics, args.metrics)
    logger.info("trained in %.1fs", time.time() - t0)
    print(f"saved model to {args.out}; eval accuracy {metrics['eval_accuracy']}")
    return 0


def _detect_cfg(args) -> DetectConfig:
    return DetectConfig(score_threshold=args.score_threshold, link_threshold=args.link_threshold,
                        nms_threshold=args.nms_threshold, solo_threshold=args.solo_threshold,
                        quads=args.quads)


def cmd_infer(args) -> int:
    model = load_model(args.model)
    cfg = _detect_cfg(args)
    files = _scene_files(args.scene)
    provider = FeatureProvider.from_file(args.features) if args.features else None
    if provider is not None and len(files) > 1:
        raise CliError("--features applies to a single scene")
    if provider is not None and provider.dim != model.provider_dim:
        raise CliError(f"feature file width {provider.dim} does not match the model "
                       f"({model.provider_dim})")
    multi = len(files) > 1 or Path(args.scene).is_dir()
    for f in files:
        scene = load_scene(f)
        insts = detect(scene.components, model, scene.width, scene.height, cfg, provider)
        out = detections_to_json(f.name, insts, seed=scene.seed,
                                 link_threshold=cfg.link_threshold)
        target = Path(args.out) / f"det_{f.name}" if multi else Path(args.out)
        _dump(out, target)
    print(f"wrote detections for {len(files)} scene(s) to {args.out}")
    return 0


def _pair_files(pred: Path, gt: Path):
    if gt.is_dir():
        gts = _scene_files(gt)
        return [(pred / f"det_{g.name}", g) for g in gts]
    return [(pred, gt)]


def cmd_eval(args) -> int:
    per_scene = []
    reports = []
    for pf, gf in _pair_files(Path(args.pred), Path(args.gt)):
        if not pf.exists():
            raise CliError(f"missing detections for {gf.name}: {pf}")
        det = json.loads(pf.read_text())
        scene = load_scene(gf)
        preds = [np.asarray(i["boundary"]) for i in det["instances"]]
        rep = match_instances(preds, [i.boundary for i in scene.instances], args.iou)
        reports.append(rep)
        per_scene.append(dict(scene=gf.name, **rep.to_json()))
    agg = aggregate(reports)
    report = {"per_scene": per_scene, "aggregate": agg, "iou_threshold": args.iou}
    if args.out:
        _dump(report, args.out)
    print(format_table({"detections": agg}))
    return 0


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    dets = json.loads(Path(args.detections).read_text()) if args.detections else None
    edges = []
    comps = scene.components
    if len(comps) >= 2:
        index = NeighborIndex(comps, scene.width, scene.height)
        pivots = [args.pivot] if args.pivot is not None else range(len(comps))
        for p in pivots:
            g = build_local_graph(p, comps, scene.width, scene.height, index=index)
            a = g.adjacency
            for i in range(g.size):
                for j in range(i + 1, g.size):
                    if a[i, j]:
                        edges.append((g.nodes[i], g.nodes[j]))
    svg = render_svg(scene, dets, sorted(set(edges)))
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    t0 = time.time()
    results = run_gradcheck(args.graphs, seed=args.seed)
    bad = 0
    for r in results:
        ok = r.worst < args.tol
        bad += not ok
        print(f"graph {r.graph:2d} n={r.n_nodes:2d} {'train' if r.training else 'infer'} "
              f"worst rel err {r.worst:.2e} {'ok' if ok else 'FAIL'}")
    print(f"{len(results) - bad}/{len(results)} graphs passed in {time.time() - t0:.1f}s "
          f"(kernel backend: {kernels.BACKEND})")
    return 1 if bad else 0


def cmd_ablate(args) -> int:
    model = load_model(args.model)
    cfg = _detect_cfg(args)
    rep_base, rep_gcn = [], []
    for f in _scene_files(args.data):
        scene = load_scene(f)
        gts = [i.boundary for i in scene.instances]
        rep_base.append(evaluate_scene(detect_baseline(scene.components, cfg, args.distance_factor),
                                       gts, args.iou))
        rep_gcn.append(evaluate_scene(detect(scene.components, model, scene.width, scene.height,
                                             cfg), gts, args.iou))
    rows = {"baseline": aggregate(rep_base), "baseline+gcn": aggregate(rep_gcn)}
    print(format_table(rows))
    if args.out:
        _dump(rows, args.out)
    return 0


# ---------------------------------------------------------------------------


def _add_detect_flags(p) -> None:
    d = DetectConfig()
    p.add_argument("--link-threshold", type=float, default=d.link_threshold)
    p.add_argument("--score-threshold", type=float, default=d.score_threshold)
    p.add_argument("--nms-threshold", type=float, default=d.nms_threshold)
    p.add_argument("--solo-threshold", type=float, default=d.solo_threshold)
    p.add_argument("--quads", action="store_true", help="also emit 4-point rectangles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textlink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes with ground truth")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--adversarial", action="store_true",
                   help="stacked curved instances with small gaps")
    p.add_argument("--noise", choices=("default", "none"), default="default")
    p.add_argument("--config", help="JSON generator config (must contain 'seed')")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the link classifier on scene files")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-graphs", type=int, default=5000)
    p.add_argument("--holdout", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default="adam")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--c-eps", type=int, default=16)
    p.add_argument("--xi", type=float, default=0.75)
    p.add_argument("--hidden", default=",".join(map(str, DEFAULT_HIDDEN)))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="detect text instances in scene files")
    p.add_argument("--model", required=True)
    p.add_argument("--scene", required=True, help="scene file or directory")
    p.add_argument("--out", required=True, help="output file, or directory for many scenes")
    p.add_argument("--features", help="external per-component feature file")
    _add_detect_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="draw a scene (and detections) as SVG")
    p.add_argument("--scene", required=True)
    p.add_argument("--detections")
    p.add_argument("--pivot", type=int, help="only draw this pivot's local graph")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    p.add_argument("--graphs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="heuristic grouping vs. learned grouping")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--distance-factor", type=float, default=1.2)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out")
    _add_detect_flags(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("TEXTLINK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CliError, ModelLoadError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"textlink {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
