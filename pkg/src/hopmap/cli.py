"""Command-line entry point.

Subcommands wire the library end to end: build a map from an ingest file,
plan between nodes or text-query vectors, run the synthetic evaluations,
and export figures next to the delimited outputs. Every run drops a
"hopmap-config/1" echo of its parameters into its output directory so
results stay reproducible.

Exit codes: 0 success, 2 input validation, 3 query resolution failure,
4 planning failure.
"""

from __future__ import annotations

import argparse
import csv
import importlib.util
import json
import sys
from pathlib import Path

import numpy as np

from . import graph as graphmod
from . import ingest as ingestmod
from . import localize as locmod
from . import planning as planmod
from . import report
from . import simworld as simmod
from .control import ControlParams
from .errors import HopmapError, IngestError, QueryError

FORMAT_CONFIG = "hopmap-config/1"


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, command: str, params: dict) -> None:
    doc = {"format": FORMAT_CONFIG, "command": command, "params": params}
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")


def _parse_window(text: str) -> tuple[int, ...]:
    try:
        gaps = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise IngestError(f"invalid window {text!r}: {exc}") from exc
    if not gaps:
        raise IngestError(f"invalid window {text!r}: needs at least one gap")
    return gaps


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise IngestError(f"invalid {flag} {text!r}: {exc}") from exc
    if not values:
        raise IngestError(f"invalid {flag} {text!r}: empty list")
    return values


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise IngestError(f"invalid {flag} {text!r}: {exc}") from exc
    if not values:
        raise IngestError(f"invalid {flag} {text!r}: empty list")
    return values


def _adapter_available() -> bool:
    return importlib.util.find_spec("hopmap_extract") is not None


def _resolve_text_flag(text: str, g: "graphmod.MapGraph") -> int:
    """Embed raw text with the extraction adapter and match it to a node."""
    import hopmap_extract

    dim = next((int(n.semantic_vector.shape[0]) for n in g.nodes
                if n.semantic_vector is not None), None)
    if dim is None:
        raise QueryError("map has no semantic vectors; cannot resolve --text")
    vec = hopmap_extract.embed_text(text, dim)
    return planmod.resolve_text_query(vec, g, k=1)[0]


def _load_single_vector(path: str, name: str | None) -> np.ndarray:
    vectors = ingestmod.read_vectors(path)
    if name is None:
        if len(vectors) > 1:
            raise QueryError(
                f"{path} holds {len(vectors)} vectors; pick one by name "
                f"(available: {', '.join(sorted(vectors))})")
        return next(iter(vectors.values()))
    if name not in vectors:
        raise QueryError(f"vector {name!r} not found in {path} "
                         f"(available: {', '.join(sorted(vectors))})")
    return vectors[name]


def _world_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-objects", type=int, default=20)
    p.add_argument("--corridor-length", type=float, default=30.0)
    p.add_argument("--descriptor-dim", type=int, default=64)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--n-aliases", type=int, default=0)
    p.add_argument("--world-mode", choices=simmod.WORLD_MODES, default="corridor")
    p.add_argument("--near", type=float, default=1.0)
    p.add_argument("--far", type=float, default=5.0)
    p.add_argument("--frames", type=int, default=30, help="mapping traverse length")


def _world_from_args(args: argparse.Namespace) -> simmod.World:
    try:
        spec = simmod.WorldSpec(
            seed=args.seed, n_objects=args.n_objects,
            corridor_length=args.corridor_length,
            descriptor_dim=args.descriptor_dim, noise_sigma=args.noise_sigma,
            n_aliases=args.n_aliases, mode=args.world_mode,
            near=args.near, far=args.far)
    except ValueError as exc:
        raise IngestError(str(exc)) from exc
    return simmod.generate_world(spec)


def _world_params(args: argparse.Namespace) -> dict:
    return {"seed": args.seed, "n_objects": args.n_objects,
            "corridor_length": args.corridor_length,
            "descriptor_dim": args.descriptor_dim,
            "noise_sigma": args.noise_sigma, "n_aliases": args.n_aliases,
            "world_mode": args.world_mode, "near": args.near, "far": args.far,
            "frames": args.frames}


def _graph_config(args: argparse.Namespace) -> graphmod.GraphConfig:
    try:
        return graphmod.GraphConfig(
            theta=args.theta, window=_parse_window(args.window),
            intra_mode=args.intra_mode, l_max=args.l_max,
            renormalize_layers=not args.no_renormalize,
            pano_wrap=args.pano_wrap)
    except ValueError as exc:
        raise IngestError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_build_map(args: argparse.Namespace) -> int:
    fs = ingestmod.parse_frame_records(args.ingest)
    if args.stuff_vectors:
        stuff = list(ingestmod.read_vectors(args.stuff_vectors).values())
        fs = ingestmod.filter_stuff(fs, stuff, tau_stuff=args.tau_stuff)
    if args.min_area_frac > 0:
        fs = ingestmod.filter_small(fs, min_area_frac=args.min_area_frac)
    cfg = _graph_config(args)
    g = graphmod.build_map(fs, cfg)
    out = _outdir(args.out)
    graphmod.save_map(g, out / "map.json")
    _echo_config(out, "build-map", {
        "ingest": str(args.ingest), "theta": cfg.theta,
        "window": list(cfg.window), "intra_mode": cfg.intra_mode,
        "l_max": cfg.l_max, "renormalize_layers": cfg.renormalize_layers,
        "pano_wrap": cfg.pano_wrap, "tau_stuff": args.tau_stuff,
        "min_area_frac": args.min_area_frac,
        "stuff_vectors": args.stuff_vectors})
    if args.figures:
        report.fig_map(g, out / "map.png")
    n_intra = sum(1 for e in g.edges if e.kind == "intra")
    n_inter = len(g.edges) - n_intra
    components = graphmod.connected_component_count(g)
    print(f"map: {g.n_nodes} nodes, {n_intra} intra edges, {n_inter} inter edges, "
          f"components={components}")
    print(f"wrote {out / 'map.json'}")
    return 0


def _strategy(name: str) -> planmod.PlanStrategy:
    return planmod.PlanStrategy(name)


def cmd_plan(args: argparse.Namespace) -> int:
    g = graphmod.load_map(args.map)
    strategy = _strategy(args.strategy)
    if args.source_node is not None:
        source = args.source_node
    elif args.source_vec:
        vec = _load_single_vector(args.source_vec, args.source_vec_name)
        source = planmod.resolve_text_query(vec, g, k=1)[0]
    else:
        raise IngestError("need --source-node or --source-vec")

    out = _outdir(args.out)
    if args.ref_vec:
        # Relational query: the goal is picked among target candidates by
        # shortest path to a reference candidate.
        tvec = _load_single_vector(args.target_vec, args.target_vec_name)
        rvec = _load_single_vector(args.ref_vec, args.ref_vec_name)
        q = planmod.RelationalQuery(target_vector=tvec, reference_vector=rvec, k=args.k)
        goal, _ = planmod.resolve_relational_query(q, g, strategy)
    elif args.target_node is not None:
        goal = args.target_node
    elif args.target_vec:
        vec = _load_single_vector(args.target_vec, args.target_vec_name)
        goal = planmod.resolve_text_query(vec, g, k=1)[0]
    elif getattr(args, "text", None):
        goal = _resolve_text_flag(args.text, g)
    else:
        raise IngestError("need --target-node, --target-vec, or --ref-vec with --target-vec")

    p = planmod.plan(g, source, goal, strategy)
    planmod.write_plan_json(p, g, strategy, out / "plan.json")
    (out / "plan.dot").write_text(graphmod.export_dot(g, plan_nodes=p.steps),
                                  encoding="utf-8")
    _echo_config(out, "plan", {
        "map": str(args.map), "source": source, "target": goal,
        "strategy": strategy.value, "k": args.k,
        "text": getattr(args, "text", None)})
    if args.figures:
        report.fig_plan(g, p, out / "plan.png")
    print(f"plan: {len(p.steps)} steps, cost {p.cost} "
          f"(source {source} -> target {goal}, {strategy.value})")
    print(f"wrote {out / 'plan.json'}")
    return 0


def cmd_eval_recall(args: argparse.Namespace) -> int:
    world = _world_from_args(args)
    fs = simmod.mapping_traverse(world, args.frames, stream="map")
    cfg = _graph_config(args)
    g = graphmod.build_map(fs, cfg)
    query = simmod.mapping_traverse(world, args.frames, stream="query")
    gt = {t: t for t in range(args.frames)}
    layers = _parse_int_list(args.layers, "--layers")
    thetas = _parse_float_list(args.thetas, "--thetas")
    table = locmod.eval_recall(query, g, gt, layers, thetas, radius=args.radius)
    out = _outdir(args.out)
    locmod.write_recall_csv(table, layers, thetas, out / "recall.csv")
    _echo_config(out, "eval-recall", {
        **_world_params(args), "theta": args.theta, "window": args.window,
        "intra_mode": args.intra_mode, "l_max": args.l_max,
        "layers": layers, "thetas": thetas, "radius": args.radius})
    if args.figures:
        report.fig_recall_heatmap(table, layers, thetas, out / "recall.png")
    for ri, layer in enumerate(layers):
        row = " ".join(f"{table[ri, ci]:.3f}" for ci in range(len(thetas)))
        print(f"layer {layer}: {row}")
    print(f"wrote {out / 'recall.csv'}")
    return 0


def cmd_eval_assoc(args: argparse.Namespace) -> int:
    world = _world_from_args(args)
    map_views = simmod.mapping_traverse(world, args.frames, stream="map")
    query_views = simmod.mapping_traverse(world, args.frames, stream="query")
    inst, cat = simmod.eval_association(map_views, query_views)
    out = _outdir(args.out)
    with (out / "assoc.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_acc", "category_acc"])
        w.writerow([f"{inst:.6f}", f"{cat:.6f}"])
    _echo_config(out, "eval-assoc", _world_params(args))
    print(f"instance_acc={inst:.4f} category_acc={cat:.4f}")
    print(f"wrote {out / 'assoc.csv'}")
    return 0


def cmd_sim_nav(args: argparse.Namespace) -> int:
    world = _world_from_args(args)
    fs = simmod.mapping_traverse(world, args.frames, stream="map")
    cfg = _graph_config(args)
    g = graphmod.build_map(fs, cfg)
    rng = np.random.default_rng(args.trial_seed)
    params = ControlParams(v_forward=args.v_forward)
    results = []
    out = _outdir(args.out)
    for trial in range(args.trials):
        start, goal = simmod.sample_trial(world, g, rng)
        res = simmod.run_navigation_trial(
            world, g, start, goal, mode=args.control_mode, params=params,
            strategy=_strategy(args.strategy), max_steps=args.max_steps,
            dt=args.dt, stream=f"nav{trial}")
        results.append(res)
        if args.figures:
            report.fig_trial(res, out / f"trial_{trial:02d}.png")
    simmod.write_trials_csv(results, out / "trials.csv")
    _echo_config(out, "sim-nav", {
        **_world_params(args), "theta": args.theta, "window": args.window,
        "intra_mode": args.intra_mode, "l_max": args.l_max,
        "control_mode": args.control_mode, "strategy": args.strategy,
        "trials": args.trials, "trial_seed": args.trial_seed,
        "max_steps": args.max_steps, "dt": args.dt,
        "v_forward": args.v_forward})
    if args.figures:
        report.fig_trials_summary(results, out / "trials.png")
    n_ok = sum(r.success for r in results)
    print(f"{n_ok}/{len(results)} trials succeeded")
    print(f"wrote {out / 'trials.csv'}")
    return 0


def cmd_sim_export(args: argparse.Namespace) -> int:
    world = _world_from_args(args)
    fs = simmod.mapping_traverse(world, args.frames, stream="map")
    ingestmod.write_frame_records(fs, args.out)
    print(f"wrote {args.out} ({fs.n_frames} frames, {fs.n_records} records)")
    return 0


def cmd_export_dot(args: argparse.Namespace) -> int:
    g = graphmod.load_map(args.map)
    text = graphmod.export_dot(g)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=0.7)
    p.add_argument("--window", default="1,2,3")
    p.add_argument("--intra-mode", choices=graphmod.INTRA_MODES, default="delaunay")
    p.add_argument("--l-max", type=int, default=2)
    p.add_argument("--no-renormalize", action="store_true")
    p.add_argument("--pano-wrap", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hopmap",
        description="Segment-level topological mapping, localization and hop planning.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-map", help="build a map from an ingest file")
    p.add_argument("--ingest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _add_graph_args(p)
    p.add_argument("--stuff-vectors", help="vectors file of background embeddings to drop")
    p.add_argument("--tau-stuff", type=float, default=0.9)
    p.add_argument("--min-area-frac", type=float, default=0.0,
                   help="drop segments below this fraction of image area (0 = keep all)")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("plan", help="plan between nodes or query vectors")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--source-node", type=int)
    p.add_argument("--source-vec", help="vectors file for the source query")
    p.add_argument("--source-vec-name")
    p.add_argument("--target-node", type=int)
    p.add_argument("--target-vec", help="vectors file for the target query")
    p.add_argument("--target-vec-name")
    p.add_argument("--ref-vec", help="vectors file for a relational reference query")
    p.add_argument("--ref-vec-name")
    if _adapter_available():
        # Convenience only: the engine itself never embeds text. The flag
        # appears when the hopmap-extract package is importable.
        p.add_argument("--text", help="resolve the target by embedding this "
                                      "text with the extraction adapter")
    p.add_argument("--k", type=int, default=3, help="candidates per side for relational queries")
    p.add_argument("--strategy", choices=[s.value for s in planmod.PlanStrategy],
                   default="intra-dt")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval-recall", help="recall sweep on a synthetic world")
    _world_args(p)
    _add_graph_args(p)
    p.add_argument("--layers", default="0,1,2")
    p.add_argument("--thetas", default="0.0,0.1,0.3,0.7")
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_eval_recall)

    p = sub.add_parser("eval-assoc", help="association accuracy on a synthetic world")
    _world_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval_assoc)

    p = sub.add_parser("sim-nav", help="navigation trials on a synthetic world")
    _world_args(p)
    _add_graph_args(p)
    p.add_argument("--control-mode", choices=["discrete", "continuous"],
                   default="continuous")
    p.add_argument("--strategy", choices=[s.value for s in planmod.PlanStrategy],
                   default="intra-dt")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--trial-seed", type=int, default=7)
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--dt", type=float, default=0.25)
    p.add_argument("--v-forward", type=float, default=0.4)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_sim_nav)

    p = sub.add_parser("sim-export", help="write a mapping traverse as an ingest file")
    _world_args(p)
    p.add_argument("--out", required=True, help="output ingest file")
    p.set_defaults(func=cmd_sim_export)

    p = sub.add_parser("export-dot", help="export a map as Graphviz DOT")
    p.add_argument("--map", required=True)
    p.add_argument("--out", default="-", help="output file, or - for stdout")
    p.set_defaults(func=cmd_export_dot)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HopmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
