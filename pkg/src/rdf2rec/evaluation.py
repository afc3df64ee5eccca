"""Scenario subgraphs and sweeps over (scenario, encoder, strategy, seed)."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .features import STRATEGIES, InfeasibleStrategy, MissingFeatureError
from .gnn import EncoderConfig
from .graph_builder import EdgeKey, HeteroGraph
from .link_prediction import TrainConfig, TrainingError, evaluate, split_edges, train
from .metrics import MetricsReport

log = logging.getLogger(__name__)

MODES = ("full", "bipartite", "homogeneous")
ENCODERS = ("sage", "gat", "hgt")
CSV_HEADER = "scenario,setting,encoder,strategy,seed,f1,precision,recall,auc"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    mode: str
    target: EdgeKey

    def __post_init__(self):
        if self.mode not in MODES:
            raise ScenarioError(f"unknown setting {self.mode!r}; expected one of {MODES}")
        object.__setattr__(self, "target", tuple(self.target))

    def retained(self, graph: HeteroGraph) -> tuple[list[str], list[EdgeKey]]:
        """Node and edge types kept by this mode, in graph order."""
        src, _, dst = self.target
        if self.target not in graph.edge_types:
            raise ScenarioError(f"scenario {self.name!r}: target {self.target} not in graph")
        if self.mode == "full":
            return list(graph.node_types), list(graph.edge_types)
        if self.mode == "homogeneous" and src != dst:
            raise ScenarioError(f"scenario {self.name!r}: homogeneous setting needs a self-edge "
                                f"target, got {self.target}")
        keep_edges = [k for k, e in graph.edge_types.items()
                      if k == self.target or e.reverse_of == self.target]
        keep_nodes = [t for t in graph.node_types if t in (src, dst)]
        return keep_nodes, keep_edges


def extract_scenario(graph: HeteroGraph, spec: ScenarioSpec) -> HeteroGraph:
    """Subgraph for a setting; node indices and feature tables are carried over unchanged."""
    nodes, edges = spec.retained(graph)
    if spec.mode == "full":
        return graph
    return HeteroGraph(
        {t: graph.node_types[t] for t in nodes},
        {k: graph.edge_types[k] for k in edges},
        {t: v for t, v in graph.content_features.items() if t in nodes},
        {t: v for t, v in graph.topology_features.items() if t in nodes},
        dict(graph.report),
    )


@dataclass
class SweepConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seeds: int = 1
    master_seed: int = 0

    def cell_seed(self, rep: int) -> int:
        return self.master_seed + rep


@dataclass
class SweepRow:
    scenario: str
    setting: str
    encoder: str
    strategy: str
    seed: int
    report: MetricsReport | None = None
    reason: str = ""

    @property
    def sort_key(self):
        return (self.scenario, MODES.index(self.setting), ENCODERS.index(self.encoder),
                STRATEGIES.index(self.strategy), self.seed)

    def csv(self) -> str:
        head = f"{self.scenario},{self.setting},{self.encoder},{self.strategy},{self.seed}"
        if self.report is None:
            return head + ",n/a,n/a,n/a,n/a"
        r = self.report
        return head + "," + ",".join(f"{v:.6f}" for v in (r.f1, r.precision, r.recall, r.auc))


def run_cell(graph: HeteroGraph, spec: ScenarioSpec, encoder: str, strategy: str, seed: int,
             config: SweepConfig, out_dir: Path | None = None, extra: dict | None = None) -> SweepRow:
    """Train and evaluate one cell; infeasible cells come back with a reason."""
    row = SweepRow(spec.name, spec.mode, encoder, strategy, seed)
    if encoder == "hgt" and spec.mode == "homogeneous":
        row.reason = "HGT meta-relations degenerate on a single node/edge type"
        return row
    sub = extract_scenario(graph, spec)
    enc = EncoderConfig(**{**asdict(config.encoder), "architecture": encoder, "seed": seed})
    tc = TrainConfig(**{**asdict(config.train), "seed": seed})
    split = split_edges(sub, spec.target, config.ratios, seed=seed)
    try:
        model, curve = train(sub, split, strategy, enc, tc)
    except (InfeasibleStrategy, MissingFeatureError, TrainingError) as err:
        row.reason = str(err)
        log.warning("cell %s/%s/%s/%s seed %d: n/a (%s)", spec.name, spec.mode, encoder,
                    strategy, seed, err)
        return row
    fingerprint = {"scenario": spec.name, "setting": spec.mode, "encoder": encoder,
                   "strategy": strategy, "seed": seed}
    row.report = evaluate(model, split, tc.threshold, fingerprint)
    if out_dir is not None:
        cell = out_dir / "runs" / f"{spec.name}__{spec.mode}__{encoder}__{strategy}__s{seed}"
        cell.mkdir(parents=True, exist_ok=True)
        write_run_manifest(cell, model, split, curve, row.report, enc, tc, spec, extra)
    return row


def write_run_manifest(cell: Path, model, split, curve, report: MetricsReport,
                       enc: EncoderConfig, tc: TrainConfig, spec: ScenarioSpec | None = None,
                       extra: dict | None = None) -> None:
    from .link_prediction import save_checkpoint
    save_checkpoint(model, cell / "checkpoint.npz")
    manifest = {
        "config": {"encoder": asdict(enc), "train": asdict(tc)},
        "seed": tc.seed,
        "strategy": model.inputs.strategy.tag,
        "encoder": enc.architecture,
        "scenario": None if spec is None else {"name": spec.name, "setting": spec.mode,
                                               "target": list(spec.target)},
        "target": list(split.target),
        "split": split.sizes(),
        "inputs": model.inputs.manifest(),
        "curve": curve,
        "metrics": report.to_dict(),
        "checkpoint": "checkpoint.npz",
        **(extra or {}),
    }
    (cell / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def run_sweep(graph: HeteroGraph, scenarios: list[ScenarioSpec], encoders=ENCODERS,
              strategies=STRATEGIES, config: SweepConfig | None = None,
              out_dir=None, extra: dict | None = None) -> list[SweepRow]:
    config = config or SweepConfig()
    out = Path(out_dir) if out_dir is not None else None
    for e in encoders:
        if e not in ENCODERS:
            raise ValueError(f"unknown encoder {e!r}")
    rows = []
    for spec in scenarios:
        spec.retained(graph)
        for encoder in encoders:
            for strategy in strategies:
                for rep in range(config.seeds):
                    rows.append(run_cell(graph, spec, encoder, strategy, config.cell_seed(rep),
                                         config, out, extra))
    rows.sort(key=lambda r: r.sort_key)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(rows, out / "results.csv")
        (out / "results.md").write_text(format_results_table(rows), encoding="utf-8")
    return rows


def write_results_csv(rows: list[SweepRow], path) -> None:
    lines = [CSV_HEADER] + [r.csv() for r in sorted(rows, key=lambda r: r.sort_key)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def aggregate(rows: list[SweepRow]) -> dict[tuple, dict]:
    """Per (scenario, setting, encoder, strategy): mean and std of each metric over seeds."""
    groups: dict[tuple, list[MetricsReport]] = {}
    for r in rows:
        key = (r.scenario, r.setting, r.encoder, r.strategy)
        groups.setdefault(key, [])
        if r.report is not None:
            groups[key].append(r.report)
    out = {}
    for key, reps in groups.items():
        if not reps:
            out[key] = None
            continue
        stats = {}
        for m in ("f1", "precision", "recall", "auc"):
            vals = np.array([getattr(x, m) for x in reps])
            stats[m] = (float(vals.mean()), float(vals.std()))
        stats["n"] = len(reps)
        out[key] = stats
    return out


def _fmt(stat, with_std: bool) -> str:
    mean, std = stat
    return f"{mean:.3f}±{std:.3f}" if with_std else f"{mean:.3f}"


def format_results_table(rows: list[SweepRow]) -> str:
    """Markdown: one block per (scenario, setting); rows are strategies, column groups encoders."""
    agg = aggregate(rows)
    with_std = any(s is not None and s["n"] > 1 for s in agg.values())
    blocks = sorted({(k[0], k[1]) for k in agg}, key=lambda b: (b[0], MODES.index(b[1])))
    encoders = [e for e in ENCODERS if any(k[2] == e for k in agg)]
    strategies = [s for s in STRATEGIES if any(k[3] == s for k in agg)]
    out = []
    for scenario, setting in blocks:
        out.append(f"### {scenario} ({setting})\n")
        head = "| strategy | " + " | ".join(f"{e} {m}" for e in encoders
                                            for m in ("AUC", "F1", "Pre", "Re")) + " |"
        out.append(head)
        out.append("|" + "---|" * (1 + 4 * len(encoders)))
        for s in strategies:
            cells = []
            for e in encoders:
                st = agg.get((scenario, setting, e, s))
                if st is None:
                    cells.extend(["-"] * 4)
                else:
                    cells.extend(_fmt(st[m], with_std) for m in ("auc", "f1", "precision", "recall"))
            out.append(f"| {s} | " + " | ".join(cells) + " |")
        out.append("")
    return "\n".join(out)


def mean_metric(rows: list[SweepRow], metric: str = "auc", **match) -> float:
    vals = [getattr(r.report, metric) for r in rows if r.report is not None
            and all(getattr(r, k) == v for k, v in match.items())]
    return float(np.mean(vals)) if vals else math.nan
