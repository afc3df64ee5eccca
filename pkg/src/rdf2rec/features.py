"""Initial node features, per-type projections and content/topology combination."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .graph_builder import FeatureTable, HeteroGraph

STRATEGIES = ("one_hot", "cb_nld", "cb_literal", "tb", "comb_nld_or_tb", "comb_concat",
              "comb_addition", "comb_waddition", "comb_average", "comb_nc")
COMBINE_MODES = ("concat", "addition", "waddition", "average", "nc")
_PROJECTED_COMBINATIONS = {"comb_addition": "addition", "comb_waddition": "waddition",
                           "comb_average": "average", "comb_nc": "nc"}


class MissingFeatureError(ValueError):
    """A strategy needs an input (content or topology features) the graph lacks."""


class InfeasibleStrategy(ValueError):
    """The strategy is well formed but cannot be realised on this graph."""


@dataclass
class InitStrategy:
    tag: str
    alpha_init: float = 0.5

    def __post_init__(self):
        if self.tag not in STRATEGIES:
            raise ValueError(f"unknown init strategy {self.tag!r}; expected one of {STRATEGIES}")

    @property
    def needs_content(self) -> bool:
        return self.tag.startswith("cb_") or self.tag.startswith("comb_")

    @property
    def needs_topology(self) -> bool:
        return self.tag == "tb" or self.tag.startswith("comb_")


def _require(graph: HeteroGraph, tag: str, content: bool, topology: bool) -> None:
    if content and set(graph.content_features) != set(graph.node_types):
        missing = sorted(set(graph.node_types) - set(graph.content_features))
        raise MissingFeatureError(f"strategy {tag!r} requires content features (x_c); "
                                  f"missing for {missing}")
    if topology and set(graph.topology_features) != set(graph.node_types):
        raise MissingFeatureError(f"strategy {tag!r} requires topology features (x_t); "
                                  "train KGE embeddings first")


def _one_hot(n: int) -> FeatureTable:
    return FeatureTable(np.eye(n), "OneHot", [{"kind": "OneHot", "width": n}])


def _nld(table: FeatureTable) -> FeatureTable | None:
    block = table.nld_block()
    if block is None:
        return None
    spec = [b for b in table.column_spec if b.get("nld")]
    return FeatureTable(block, "Content", spec)


def _concat(a: FeatureTable, b: FeatureTable) -> FeatureTable:
    return FeatureTable(np.hstack([a.values, b.values]), "Combined(comb_concat)",
                        list(a.column_spec) + list(b.column_spec))


def source_tables(graph: HeteroGraph, strategy: InitStrategy | str) -> dict[str, tuple[FeatureTable, ...]]:
    """Raw input tables per node type: one table, or (content, topology) for the
    projected combination modes."""
    tag = strategy.tag if isinstance(strategy, InitStrategy) else InitStrategy(strategy).tag
    s = InitStrategy(tag)
    _require(graph, tag, s.needs_content, s.needs_topology)
    out: dict[str, tuple[FeatureTable, ...]] = {}
    if tag == "cb_nld" and all(_nld(t) is None for t in graph.content_features.values()):
        raise InfeasibleStrategy("cb_nld: no node type has a natural-language description")
    for name in graph.node_types:
        if tag == "one_hot":
            out[name] = (_one_hot(graph.num_nodes(name)),)
        elif tag == "cb_literal":
            out[name] = (graph.content_features[name],)
        elif tag == "tb":
            out[name] = (graph.topology_features[name],)
        elif tag == "cb_nld":
            nld = _nld(graph.content_features[name])
            if nld is None:
                nld = FeatureTable(np.zeros((graph.num_nodes(name), 1)), "Content",
                                   [{"kind": "Empty", "width": 1}], frozenset({"content_empty"}))
            out[name] = (nld,)
        elif tag == "comb_nld_or_tb":
            nld = _nld(graph.content_features[name])
            out[name] = (nld if nld is not None else graph.topology_features[name],)
        elif tag == "comb_concat":
            out[name] = (_concat(graph.content_features[name], graph.topology_features[name]),)
        else:
            out[name] = (graph.content_features[name], graph.topology_features[name])
    return out


def init_features(graph: HeteroGraph, strategy: InitStrategy | str) -> dict[str, FeatureTable]:
    """Static x⁰ tables for the strategies that need no learnable combination."""
    tag = strategy.tag if isinstance(strategy, InitStrategy) else strategy
    if tag in _PROJECTED_COMBINATIONS:
        raise ValueError(f"{tag} combines projected inputs; build an InputEncoder instead")
    return {name: tables[0] for name, tables in source_tables(graph, tag).items()}


# ---------------------------------------------------------------- layers

def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class ProjectionLayer:
    """Per node type affine map ``x W + b`` into a shared width."""
    weights: dict[str, T.Tensor]
    biases: dict[str, T.Tensor]
    out_dim: int

    @classmethod
    def create(cls, in_dims: dict[str, int], out_dim: int, rng: np.random.Generator,
               prefix: str = "proj") -> "ProjectionLayer":
        w = {t: T.parameter(glorot(rng, d, out_dim), f"{prefix}.{t}.W") for t, d in in_dims.items()}
        b = {t: T.parameter(np.zeros((1, out_dim)), f"{prefix}.{t}.b") for t in in_dims}
        return cls(w, b, out_dim)

    def parameters(self) -> dict[str, T.Tensor]:
        out = {}
        for t in self.weights:
            out[self.weights[t].name] = self.weights[t]
            out[self.biases[t].name] = self.biases[t]
        return out


def project(layer: ProjectionLayer, x, node_type: str):
    """Row-wise ``x W + b``; accepts a Tensor or a FeatureTable."""
    as_table = isinstance(x, FeatureTable)
    xt = T.tensor(x.values) if as_table else x
    w = layer.weights[node_type]
    if xt.shape[1] != w.shape[0]:
        raise T.ShapeError(f"project: node type {node_type!r} has input width {xt.shape[1]}, "
                           f"layer expects {w.shape[0]}")
    out = T.add(T.matmul(xt, w), layer.biases[node_type])
    if as_table:
        return FeatureTable(out.data, "Combined(projection)",
                            [{"kind": "Projection", "width": layer.out_dim}])
    return out


@dataclass
class Combinator:
    """Feed-forward combination ``f([a, b] W + c)``; ``f`` is ReLU unless replaced."""
    W: T.Tensor
    c: T.Tensor
    activation: str = "relu"

    @classmethod
    def create(cls, d_in: int, d_out: int, rng: np.random.Generator, name: str = "nc") -> "Combinator":
        return cls(T.parameter(glorot(rng, 2 * d_in, d_out), f"{name}.W"),
                   T.parameter(np.zeros((1, d_out)), f"{name}.c"))

    def __call__(self, a: T.Tensor, b: T.Tensor) -> T.Tensor:
        z = T.add(T.matmul(T.concat_cols([a, b]), self.W), self.c)
        if self.activation == "relu":
            return T.relu(z)
        if self.activation == "identity":
            return z
        raise ValueError(f"unknown combinator activation {self.activation!r}")


def _broadcast_scalar(alpha: T.Tensor, n: int) -> T.Tensor:
    return T.gather_rows(alpha, np.zeros(n, dtype=np.int64))


def combine(a, b, mode: str, alpha=None, combinator: Combinator | None = None):
    """Combine two equal-row inputs (Tensors or FeatureTables).

    All modes but ``concat`` require equal widths.  ``alpha`` for
    ``waddition`` is a float or a (1, 1) Tensor.
    """
    tables = isinstance(a, FeatureTable) and isinstance(b, FeatureTable)
    ta = T.tensor(a.values) if isinstance(a, FeatureTable) else a
    tb = T.tensor(b.values) if isinstance(b, FeatureTable) else b
    if ta.shape[0] != tb.shape[0]:
        raise T.ShapeError(f"combine: row-count mismatch {ta.shape[0]} vs {tb.shape[0]}")
    if mode not in COMBINE_MODES:
        raise ValueError(f"unknown combine mode {mode!r}")
    if mode != "concat" and ta.shape[1] != tb.shape[1]:
        raise T.ShapeError(f"combine({mode}): width mismatch {ta.shape[1]} vs {tb.shape[1]}")
    if mode == "concat":
        out = T.concat_cols([ta, tb])
    elif mode == "addition":
        out = T.add(ta, tb)
    elif mode == "average":
        out = T.scale(T.add(ta, tb), 0.5)
    elif mode == "waddition":
        if alpha is None:
            alpha = 0.5
        if not isinstance(alpha, T.Tensor):
            alpha = T.tensor([[float(alpha)]])
        w = _broadcast_scalar(alpha, ta.shape[0])
        one_minus = _broadcast_scalar(T.sub(T.tensor([[1.0]]), alpha), ta.shape[0])
        out = T.add(T.scale_rows(ta, w), T.scale_rows(tb, one_minus))
    else:
        if combinator is None:
            raise ValueError("combine(nc) needs a Combinator")
        out = combinator(ta, tb)
    if tables:
        spec = (list(a.column_spec) + list(b.column_spec)) if mode == "concat" \
            else [{"kind": f"Combined({mode})", "width": out.shape[1]}]
        return FeatureTable(out.data, f"Combined({mode})", spec)
    return out


class InputEncoder:
    """Learnable mapping from a strategy's raw inputs to width ``out_dim`` per type.

    Single-input strategies (including concatenation) are projected directly;
    the addition family projects content and topology separately, then combines.
    """

    def __init__(self, graph: HeteroGraph, strategy: InitStrategy | str, out_dim: int = 64,
                 seed: int = 0):
        self.strategy = strategy if isinstance(strategy, InitStrategy) else InitStrategy(strategy)
        self.out_dim = out_dim
        rng = np.random.default_rng(seed)
        self.sources = source_tables(graph, self.strategy)
        self.inputs = {t: tuple(T.tensor(tab.values) for tab in tabs)
                       for t, tabs in self.sources.items()}
        self.mode = _PROJECTED_COMBINATIONS.get(self.strategy.tag)
        self.alpha: dict[str, T.Tensor] = {}
        self.combinators: dict[str, Combinator] = {}
        if self.mode is None:
            self.proj = ProjectionLayer.create(
                {t: tabs[0].dim for t, tabs in self.sources.items()}, out_dim, rng, "proj")
            self.proj_t = None
        else:
            self.proj = ProjectionLayer.create(
                {t: tabs[0].dim for t, tabs in self.sources.items()}, out_dim, rng, "proj_c")
            self.proj_t = ProjectionLayer.create(
                {t: tabs[1].dim for t, tabs in self.sources.items()}, out_dim, rng, "proj_t")
            for t in self.sources:
                if self.mode == "waddition":
                    self.alpha[t] = T.parameter([[self.strategy.alpha_init]], f"alpha.{t}")
                elif self.mode == "nc":
                    self.combinators[t] = Combinator.create(out_dim, out_dim, rng, f"nc.{t}")

    def parameters(self) -> dict[str, T.Tensor]:
        params = dict(self.proj.parameters())
        if self.proj_t is not None:
            params.update(self.proj_t.parameters())
        for a in self.alpha.values():
            params[a.name] = a
        for c in self.combinators.values():
            params[c.W.name] = c.W
            params[c.c.name] = c.c
        return params

    def __call__(self) -> dict[str, T.Tensor]:
        out = {}
        for t, xs in self.inputs.items():
            if self.mode is None:
                out[t] = project(self.proj, xs[0], t)
            else:
                a = project(self.proj, xs[0], t)
                b = project(self.proj_t, xs[1], t)
                out[t] = combine(a, b, self.mode, alpha=self.alpha.get(t),
                                 combinator=self.combinators.get(t))
        return out

    def after_step(self) -> None:
        for a in self.alpha.values():
            np.clip(a.data, 0.0, 1.0, out=a.data)

    def manifest(self) -> dict:
        return {
            "strategy": self.strategy.tag,
            "out_dim": self.out_dim,
            "input_dims": {t: [tab.dim for tab in tabs] for t, tabs in self.sources.items()},
            "alpha": {t: float(a.data[0, 0]) for t, a in self.alpha.items()},
            "combinator": {t: list(c.W.shape) for t, c in self.combinators.items()},
        }
