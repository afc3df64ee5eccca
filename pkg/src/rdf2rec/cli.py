"""``rdf2rec`` command line: generate, convert, embed, train, evaluate, sweep."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import config as C
from .evaluation import (MODES, ScenarioError, ScenarioSpec, SweepConfig, extract_scenario,
                         run_sweep, write_run_manifest)
from .features import STRATEGIES, InfeasibleStrategy, InitStrategy, MissingFeatureError
from .gnn import ARCHITECTURES
from .graph_builder import (DatasetError, convert, import_external_embeddings, load_dataset,
                            write_dataset, write_embeddings)
from .kge import VARIANTS, KgeTrainingError, save_model, train_kge
from .link_prediction import (LinkPredictor, TrainingError, evaluate, load_checkpoint,
                              split_edges, train)
from .rdf_store import NTriplesParseError, read_ntriples, write_ntriples
from .synthetic import PROFILES, generate, write_sidecar

log = logging.getLogger("rdf2rec")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_DATASET, EXIT_DEPENDENCY = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


# ------------------------------------------------------------ config glue

# flag dest -> config key; a flag left at None keeps the config value
FLAG_KEYS = {
    "strict": None,
    "text_dim": "features.text_dim",
    "feature_seed": "features.seed",
    "cat_threshold": "schema.cat_threshold",
    "keep_untyped": "schema.keep_untyped",
    "nld_properties": "schema.nld_properties",
    "model": "kge.model", "dim": "kge.dim", "kge_epochs": "kge.epochs", "kge_lr": "kge.lr",
    "encoder": "encoder.architecture", "layers": "encoder.layers", "heads": "encoder.heads",
    "hidden_dim": "encoder.hidden_dim", "aggregator": "encoder.aggregator",
    "epochs": "train.epochs", "lr": "train.lr", "patience": "train.patience",
    "threshold": "train.threshold",
    "scenario": "scenario.name", "setting": "scenario.setting", "target": "scenario.target",
    "encoders": "sweep.encoders", "strategies": "sweep.strategies", "settings": "sweep.settings",
    "seeds": "sweep.seeds",
    "seed": "seed",
}


def resolve_config(args) -> C.RunConfig:
    overrides = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(EXIT_INPUT, f"--set expects section.key=value, got {item!r}")
        overrides[key.strip()] = value
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if key is not None and value is not None:
            overrides[key] = value if not isinstance(value, bool) else str(value)
    try:
        cfg = C.load_config(getattr(args, "config", None), overrides)
    except FileNotFoundError as err:
        raise CliError(EXIT_INPUT, f"config file not found: {err.filename}") from err
    except (KeyError, ValueError) as err:
        raise CliError(EXIT_INPUT, f"bad configuration: {err}") from err
    if cfg.kge.seed == 0 and cfg.seed:
        cfg.kge = type(cfg.kge)(**{**asdict(cfg.kge), "seed": cfg.seed})
    return cfg


def _load(dataset: str, with_embeddings: bool = True):
    try:
        return load_dataset(dataset, with_embeddings=with_embeddings)
    except DatasetError as err:
        raise CliError(EXIT_DATASET, str(err)) from err


def _pick_target(graph, cfg: C.RunConfig, setting: str):
    try:
        key = cfg.scenario.target_key()
    except ValueError as err:
        raise CliError(EXIT_INPUT, str(err)) from err
    if key is not None:
        return key
    forward = graph.forward_edge_types()
    if setting == "homogeneous":
        forward = [k for k in forward if k[0] == k[2]]
    else:
        forward = [k for k in forward if k[0] != k[2]] or forward
    if not forward:
        raise CliError(EXIT_EMPTY, f"no edge type suitable for the {setting} setting")
    return max(forward, key=lambda k: (len(graph.edge_types[k]), k))


def _check_strategy(graph, tag: str, dataset: str) -> None:
    strategy = InitStrategy(tag)
    if strategy.needs_topology:
        missing = [t for t in graph.node_types if t not in graph.topology_features]
        if missing:
            path = Path(dataset) / f"embeddings_{missing[0]}.tsv"
            raise CliError(EXIT_DEPENDENCY, f"strategy {tag!r} needs topology embeddings; "
                                            f"missing {path} (run `rdf2rec embed` first)")


# --------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    kg = generate(args.profile, args.seed if args.seed is not None else 7)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ntriples(kg.triples, out)
    sidecar = Path(args.sidecar) if args.sidecar else out.with_suffix(".communities.json")
    write_sidecar(kg, sidecar)
    print(f"wrote {len(kg.triples)} triples to {out} (communities in {sidecar})")
    return EXIT_OK


def cmd_convert(args) -> int:
    cfg = resolve_config(args)
    try:
        store = read_ntriples(args.input, strict=args.strict)
    except FileNotFoundError as err:
        raise CliError(EXIT_INPUT, f"cannot read {args.input}: no such file") from err
    except OSError as err:
        raise CliError(EXIT_INPUT, f"cannot read {args.input}: {err}") from err
    except NTriplesParseError as err:
        raise CliError(EXIT_INPUT, f"{args.input}: {err}") from err
    if len(store) == 0:
        raise CliError(EXIT_EMPTY, f"{args.input}: no triples")
    features = type(cfg.features)(**{**asdict(cfg.features), "cat_threshold": cfg.schema.cat_threshold})
    graph = convert(store, cfg.schema, features)
    if not graph.node_types:
        raise CliError(EXIT_EMPTY, f"{args.input}: graph has no typed resources")
    if args.text_embeddings:
        try:
            graph.content_features = import_external_embeddings(graph, args.text_embeddings)
        except FileNotFoundError as err:
            raise CliError(EXIT_INPUT, f"cannot read {args.text_embeddings}") from err
        except ValueError as err:
            raise CliError(EXIT_INPUT, f"{args.text_embeddings}: {err}") from err
    graph.report.update({
        "skipped_lines": len(store.skipped),
        "skipped": [{"line": e.line, "column": e.column, "message": str(e)} for e in store.skipped],
        "triples": len(store),
        "input": str(args.input),
        "strict": args.strict,
        "run_config": cfg.to_dict(),
    })
    write_dataset(graph, args.out_dir)
    counts = ", ".join(f"{t}={graph.num_nodes(t)}" for t in graph.node_types)
    print(f"converted {len(store)} triples: {counts}; {len(graph.edge_types)} edge types -> {args.out_dir}")
    return EXIT_OK


def cmd_embed(args) -> int:
    cfg = resolve_config(args)
    graph = _load(args.dataset, with_embeddings=False)
    if not graph.forward_edge_types():
        raise CliError(EXIT_EMPTY, "dataset has no edges to embed")
    try:
        model, tables, losses = train_kge(graph, cfg.kge)
    except KgeTrainingError as err:
        raise CliError(EXIT_INPUT, str(err)) from err
    out = Path(args.dataset)
    write_embeddings(graph, tables, out)
    save_model(model, out / "kge_model.json")
    _write_json(out / "embed.json", {"run_config": cfg.to_dict(), "losses": losses,
                                     "files": sorted(f"embeddings_{t}.tsv" for t in tables)})
    print(f"{cfg.kge.model} d={cfg.kge.dim}: final loss {losses[-1] if losses else float('nan'):.4f}")
    return EXIT_OK


def _scenario(graph, cfg: C.RunConfig, setting: str) -> ScenarioSpec:
    target = _pick_target(graph, cfg, setting)
    try:
        spec = ScenarioSpec(cfg.scenario.name, setting, target)
        spec.retained(graph)
    except ScenarioError as err:
        raise CliError(EXIT_INPUT, str(err)) from err
    return spec


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    graph = _load(args.dataset)
    tag = args.init
    _check_strategy(graph, tag, args.dataset)
    spec = _scenario(graph, cfg, cfg.scenario.setting)
    if cfg.encoder.architecture == "hgt" and spec.mode == "homogeneous":
        raise CliError(EXIT_INPUT, "HGT is not defined on the homogeneous setting")
    sub = extract_scenario(graph, spec)
    enc = type(cfg.encoder)(**{**asdict(cfg.encoder), "seed": cfg.seed})
    tc = type(cfg.train)(**{**asdict(cfg.train), "seed": cfg.seed})
    split = split_edges(sub, spec.target, seed=cfg.seed)
    try:
        model, curve = train(sub, split, tag, enc, tc)
    except InfeasibleStrategy as err:
        raise CliError(EXIT_INPUT, str(err)) from err
    except MissingFeatureError as err:
        raise CliError(EXIT_DEPENDENCY, str(err)) from err
    except TrainingError as err:
        raise CliError(EXIT_INPUT, str(err)) from err
    report = evaluate(model, split, tc.threshold, {"dataset": str(args.dataset), "strategy": tag,
                                                   "encoder": enc.architecture, "seed": cfg.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run_manifest(out, model, split, curve, report, enc, tc, spec,
                       {"run_config": cfg.to_dict(), "dataset": str(args.dataset)})
    print(json.dumps({k: round(getattr(report, k), 4) for k in ("auc", "f1", "precision", "recall")}))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    manifest_path = run_dir / "run.json"
    if not manifest_path.exists():
        raise CliError(EXIT_DEPENDENCY, f"missing run manifest {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    ckpt = run_dir / manifest.get("checkpoint", "checkpoint.npz")
    if not ckpt.exists():
        raise CliError(EXIT_DEPENDENCY, f"missing checkpoint {ckpt}")
    cfg = C.load_config(manifest_path)
    dataset = args.dataset or manifest.get("dataset")
    graph = _load(dataset)
    tag = manifest["strategy"]
    _check_strategy(graph, tag, dataset)
    sc = manifest["scenario"]
    spec = ScenarioSpec(sc["name"], sc["setting"], tuple(sc["target"]))
    sub = extract_scenario(graph, spec)
    enc = type(cfg.encoder)(**manifest["config"]["encoder"])
    tc = type(cfg.train)(**manifest["config"]["train"])
    split = split_edges(sub, spec.target, seed=manifest["seed"])
    model = LinkPredictor(sub, spec.target, tag, enc, seed=tc.seed)
    try:
        load_checkpoint(model, ckpt)
    except (KeyError, ValueError, OSError) as err:
        raise CliError(EXIT_DEPENDENCY, f"unusable checkpoint {ckpt}: {err}") from err
    report = evaluate(model, split, args.threshold if args.threshold is not None else tc.threshold,
                      {"run": str(run_dir)})
    _write_json(run_dir / "eval.json", {"metrics": report.to_dict(), "run_config": cfg.to_dict()})
    print(json.dumps({k: round(getattr(report, k), 4) for k in ("auc", "f1", "precision", "recall")}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    graph = _load(args.dataset)
    strategies = cfg.sweep.strategy_list()
    for s in strategies:
        if s not in STRATEGIES:
            raise CliError(EXIT_INPUT, f"unknown strategy {s!r}")
    encoders = cfg.sweep.encoder_list()
    for e in encoders:
        if e not in ARCHITECTURES:
            raise CliError(EXIT_INPUT, f"unknown encoder {e!r}")
    if any(InitStrategy(s).needs_topology for s in strategies):
        _check_strategy(graph, "tb", args.dataset)
    settings = cfg.sweep.setting_list()
    for s in settings:
        if s not in MODES:
            raise CliError(EXIT_INPUT, f"unknown setting {s!r}")
    scenarios = [_scenario(graph, cfg, s) for s in settings]
    sweep_cfg = SweepConfig(cfg.encoder, cfg.train, seeds=cfg.sweep.seeds, master_seed=cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_sweep(graph, scenarios, encoders, strategies, sweep_cfg, out,
                     {"run_config": cfg.to_dict(), "dataset": str(args.dataset)})
    _write_json(out / "sweep.json", {
        "run_config": cfg.to_dict(),
        "cells": len(rows),
        "n/a": [{"cell": [r.scenario, r.setting, r.encoder, r.strategy, r.seed], "reason": r.reason}
                for r in rows if r.report is None],
    })
    print(f"{len(rows)} rows -> {out / 'results.csv'}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file, or a run manifest (.json) to replay")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override any config key; repeatable")
    p.add_argument("--seed", type=int, help=f"master seed (default ${C.SEED_ENV} or 0)")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--encoder", choices=ARCHITECTURES)
    p.add_argument("--layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--hidden-dim", type=int)
    p.add_argument("--aggregator", choices=("mean", "pool"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--scenario", help="scenario name used in outputs")
    p.add_argument("--target", help="target edge type as Src,relation,Dst")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdf2rec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic N-Triples KG")
    p.add_argument("--profile", choices=PROFILES, default="scholarly")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", help="community labels file (default <out>.communities.json)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("convert", help="N-Triples -> heterogeneous graph dataset")
    p.add_argument("input")
    p.add_argument("out_dir")
    _common(p)
    p.add_argument("--strict", type=_bool, default=True, metavar="{true,false}")
    p.add_argument("--text-embeddings", help="TSV of precomputed text vectors keyed by IRI")
    p.add_argument("--text-dim", type=int)
    p.add_argument("--cat-threshold", type=int)
    p.add_argument("--keep-untyped", type=_bool, metavar="{true,false}")
    p.add_argument("--nld-properties", help="comma-separated predicate IRIs forced to NLD")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("embed", help="train KGE topology features")
    p.add_argument("dataset")
    _common(p)
    p.add_argument("--model", choices=VARIANTS)
    p.add_argument("--dim", type=int)
    p.add_argument("--epochs", dest="kge_epochs", type=int)
    p.add_argument("--lr", dest="kge_lr", type=float)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train one link predictor")
    p.add_argument("dataset")
    _common(p)
    _model_flags(p)
    p.add_argument("--init", choices=STRATEGIES, default="one_hot")
    p.add_argument("--setting", choices=MODES)
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="re-evaluate a trained run on its test split")
    p.add_argument("run", help="run directory holding run.json and the checkpoint")
    p.add_argument("--dataset", help="dataset directory (default: the one recorded in run.json)")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid over encoders x strategies x settings x seeds")
    p.add_argument("dataset")
    _common(p)
    _model_flags(p)
    p.add_argument("--encoders")
    p.add_argument("--strategies", help="comma-separated tags or 'all'")
    p.add_argument("--settings", help="comma-separated subset of full,bipartite,homogeneous")
    p.add_argument("--seeds", type=int)
    p.add_argument("--out", default="sweep")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as err:
        print(f"rdf2rec {args.command}: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
