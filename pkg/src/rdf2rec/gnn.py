"""Heterogeneous GraphSAGE, GAT and HGT encoders on the tape-based tensor engine.

SAGE and GAT are lifted to typed graphs with one set of message parameters
per edge type and a sum across edge types; HGT uses node-type-specific
key/query/value maps with a softmax taken jointly over all incoming edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .features import glorot
from .graph_builder import EdgeKey, HeteroGraph

ARCHITECTURES = ("sage", "gat", "hgt")


@dataclass
class EncoderConfig:
    architecture: str = "sage"
    layers: int = 2
    hidden_dim: int = 64
    heads: int = 2
    slope: float = 0.2
    aggregator: str = "mean"
    seed: int = 0

    def __post_init__(self):
        self.architecture = self.architecture.lower()
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown encoder {self.architecture!r}; expected one of {ARCHITECTURES}")
        if self.layers < 0 or self.hidden_dim < 1 or self.heads < 1:
            raise ValueError(f"invalid encoder config {self}")
        if self.architecture in ("gat", "hgt") and self.hidden_dim % self.heads:
            raise ValueError(f"hidden_dim {self.hidden_dim} is not divisible by heads {self.heads}")
        if self.aggregator not in ("mean", "pool"):
            raise ValueError(f"unknown SAGE aggregator {self.aggregator!r}")


@dataclass
class MessageGraph:
    """Node counts plus (src, dst) index arrays per edge type, as seen by the encoder."""
    node_counts: dict[str, int]
    edges: dict[EdgeKey, np.ndarray]

    @classmethod
    def from_graph(cls, graph: HeteroGraph, edges: dict[EdgeKey, np.ndarray] | None = None) -> "MessageGraph":
        counts = {t: graph.num_nodes(t) for t in graph.node_types}
        if edges is None:
            edges = {k: e.edges for k, e in graph.edge_types.items()}
        return cls(counts, {k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in edges.items()})

    def incoming(self, node_type: str) -> list[EdgeKey]:
        return [k for k in self.edges if k[2] == node_type]


def _lin(rng, d_in, d_out, name, params):
    w = T.parameter(glorot(rng, d_in, d_out), name)
    params[name] = w
    return w


def _bias(d, name, params):
    b = T.parameter(np.zeros((1, d)), name)
    params[name] = b
    return b


def _key(k: EdgeKey) -> str:
    return "__".join(k)


class _Encoder:
    def __init__(self, node_types: list[str], edge_types: list[EdgeKey], config: EncoderConfig,
                 in_dim: int | None = None):
        self.config = config
        self.node_types = list(node_types)
        self.edge_types = [tuple(k) for k in edge_types]
        self.in_dim = in_dim or config.hidden_dim
        self.params: dict[str, T.Tensor] = {}
        self.rng = np.random.default_rng(config.seed)
        self._build()

    def _build(self) -> None:
        raise NotImplementedError

    def parameters(self) -> dict[str, T.Tensor]:
        return self.params

    def layer(self, l: int, x: dict[str, T.Tensor], g: MessageGraph) -> dict[str, T.Tensor]:
        raise NotImplementedError

    def __call__(self, x: dict[str, T.Tensor], g: MessageGraph) -> dict[str, T.Tensor]:
        h = x
        for l in range(self.config.layers):
            h = self.layer(l, h, g)
        return h

    def dims(self, l: int) -> tuple[int, int]:
        return (self.in_dim if l == 0 else self.config.hidden_dim), self.config.hidden_dim

    def _last(self, l: int) -> bool:
        return l == self.config.layers - 1


class SageEncoder(_Encoder):
    """``h_B = σ(x_B W_self + Σ_r agg_r(x_A) W_r + b)``, full neighborhoods."""

    def _build(self):
        p, rng = self.params, self.rng
        for l in range(self.config.layers):
            d_in, d_out = self.dims(l)
            for t in self.node_types:
                _lin(rng, d_in, d_out, f"sage{l}.{t}.W_self", p)
                _bias(d_out, f"sage{l}.{t}.b", p)
            for k in self.edge_types:
                _lin(rng, d_in, d_out, f"sage{l}.{_key(k)}.W", p)
                if self.config.aggregator == "pool":
                    _lin(rng, d_in, d_in, f"sage{l}.{_key(k)}.W_pool", p)
                    _bias(d_in, f"sage{l}.{_key(k)}.b_pool", p)

    def aggregate(self, l: int, k: EdgeKey, x_src: T.Tensor, e: np.ndarray, n_dst: int) -> T.Tensor:
        if self.config.aggregator == "mean":
            return T.mean_segments(T.gather_rows(x_src, e[:, 0]), e[:, 1], n_dst)
        p = self.params
        z = T.relu(T.add(T.matmul(x_src, p[f"sage{l}.{_key(k)}.W_pool"]),
                         p[f"sage{l}.{_key(k)}.b_pool"]))
        return T.max_segments(T.gather_rows(z, e[:, 0]), e[:, 1], n_dst)

    def layer(self, l, x, g):
        p = self.params
        out = {}
        for t in self.node_types:
            n = g.node_counts[t]
            acc = T.matmul(x[t], p[f"sage{l}.{t}.W_self"])
            for k in g.incoming(t):
                m = self.aggregate(l, k, x[k[0]], g.edges[k], n)
                acc = T.add(acc, T.matmul(m, p[f"sage{l}.{_key(k)}.W"]))
            acc = T.add(acc, p[f"sage{l}.{t}.b"])
            out[t] = acc if self._last(l) else T.relu(acc)
        return out


def _with_self_loops(e: np.ndarray, n: int) -> np.ndarray:
    keep = e[e[:, 0] != e[:, 1]]
    loops = np.repeat(np.arange(n, dtype=np.int64)[:, None], 2, axis=1)
    return np.vstack([keep, loops])


class GatEncoder(_Encoder):
    """Per edge type and head: additive attention softmaxed over each destination's
    in-neighbors; heads concatenated on hidden layers and averaged on the last."""

    def _head_dim(self, l):
        return self.config.hidden_dim if self._last(l) else self.config.hidden_dim // self.config.heads

    def _self_typed(self, t: str) -> bool:
        return any(k[0] == t and k[2] == t for k in self.edge_types)

    def _build(self):
        p, rng = self.params, self.rng
        for l in range(self.config.layers):
            d_in, d_out = self.dims(l)
            dh = self._head_dim(l)
            for k in self.edge_types:
                for h in range(self.config.heads):
                    base = f"gat{l}.{_key(k)}.h{h}"
                    _lin(rng, d_in, dh, base + ".W", p)
                    _lin(rng, dh, 1, base + ".a_src", p)
                    _lin(rng, dh, 1, base + ".a_dst", p)
            for t in self.node_types:
                if not self._self_typed(t):
                    _lin(rng, d_in, d_out, f"gat{l}.{t}.W_self", p)
                _bias(d_out, f"gat{l}.{t}.b", p)

    def edge_index(self, k: EdgeKey, g: MessageGraph) -> np.ndarray:
        e = g.edges[k]
        if k[0] == k[2]:
            e = _with_self_loops(e, g.node_counts[k[2]])
        return e

    def attention(self, l, k, h, x, g):
        """(edge index, attention weights (m, 1), projected sources) for one edge type and head."""
        p = self.params
        base = f"gat{l}.{_key(k)}.h{h}"
        e = self.edge_index(k, g)
        z_src = T.matmul(x[k[0]], p[base + ".W"])
        z_dst = z_src if k[0] == k[2] else T.matmul(x[k[2]], p[base + ".W"])
        s_src = T.matmul(z_src, p[base + ".a_src"])
        s_dst = T.matmul(z_dst, p[base + ".a_dst"])
        logits = T.leaky_relu(T.add(T.gather_rows(s_src, e[:, 0]), T.gather_rows(s_dst, e[:, 1])),
                              self.config.slope)
        alpha = T.softmax_segments(logits, e[:, 1], g.node_counts[k[2]])
        return e, alpha, z_src

    def layer(self, l, x, g):
        p = self.params
        out = {}
        for t in self.node_types:
            n = g.node_counts[t]
            heads = []
            for h in range(self.config.heads):
                acc = None
                for k in g.incoming(t):
                    e, alpha, z_src = self.attention(l, k, h, x, g)
                    msg = T.scatter_add_rows(T.scale_rows(T.gather_rows(z_src, e[:, 0]), alpha),
                                             e[:, 1], n)
                    acc = msg if acc is None else T.add(acc, msg)
                if acc is None:
                    acc = T.tensor(np.zeros((n, self._head_dim(l))))
                heads.append(acc)
            if self._last(l):
                merged = heads[0]
                for extra in heads[1:]:
                    merged = T.add(merged, extra)
                merged = T.scale(merged, 1.0 / len(heads))
            else:
                merged = T.concat_cols(heads)
            if f"gat{l}.{t}.W_self" in p:
                merged = T.add(merged, T.matmul(x[t], p[f"gat{l}.{t}.W_self"]))
            merged = T.add(merged, p[f"gat{l}.{t}.b"])
            out[t] = merged if self._last(l) else T.relu(merged)
        return out


class HgtEncoder(_Encoder):
    """Meta-relation attention with a joint softmax over every edge into a node and
    an identity residual: ``h_v = Out_B(Σ α · V W_msg) + x_v``."""

    def _build(self):
        p, rng = self.params, self.rng
        heads = self.config.heads
        dk = self.config.hidden_dim // heads
        if self.in_dim != self.config.hidden_dim:
            raise ValueError("HGT residual needs inputs projected to hidden_dim")
        for l in range(self.config.layers):
            d = self.config.hidden_dim
            for t in self.node_types:
                for h in range(heads):
                    for m in ("K", "Q", "V"):
                        _lin(rng, d, dk, f"hgt{l}.{t}.h{h}.{m}", p)
                        _bias(dk, f"hgt{l}.{t}.h{h}.{m}_b", p)
                _lin(rng, d, d, f"hgt{l}.{t}.Out", p)
                _bias(d, f"hgt{l}.{t}.Out_b", p)
            for k in self.edge_types:
                for h in range(heads):
                    base = f"hgt{l}.{_key(k)}.h{h}"
                    p[base + ".W_att"] = T.parameter(np.eye(dk) + 0.1 * glorot(rng, dk, dk), base + ".W_att")
                    p[base + ".W_msg"] = T.parameter(np.eye(dk) + 0.1 * glorot(rng, dk, dk), base + ".W_msg")
                    p[base + ".mu"] = T.parameter([[1.0]], base + ".mu")

    def _map(self, l, t, h, m, x):
        p = self.params
        return T.add(T.matmul(x[t], p[f"hgt{l}.{t}.h{h}.{m}"]), p[f"hgt{l}.{t}.h{h}.{m}_b"])

    def attention(self, l, t, h, x, g):
        """Joint attention over all edge types into ``t`` for one head.

        Returns (per-edge-type slices, concatenated dst index, weights, values) or None.
        """
        p = self.params
        incoming = [k for k in g.incoming(t) if len(g.edges[k])]
        if not incoming:
            return None
        dk = self.config.hidden_dim // self.config.heads
        q = self._map(l, t, h, "Q", x)
        logits, values, dsts, spans, start = [], [], [], [], 0
        for k in incoming:
            e = g.edges[k]
            base = f"hgt{l}.{_key(k)}.h{h}"
            key = T.matmul(T.gather_rows(self._map(l, k[0], h, "K", x), e[:, 0]), p[base + ".W_att"])
            raw = T.rowdot(key, T.gather_rows(q, e[:, 1]))
            mu = T.gather_rows(p[base + ".mu"], np.zeros(len(e), dtype=np.int64))
            logits.append(T.scale(T.mul(raw, mu), 1.0 / math.sqrt(dk)))
            values.append(T.matmul(T.gather_rows(self._map(l, k[0], h, "V", x), e[:, 0]),
                                   p[base + ".W_msg"]))
            dsts.append(e[:, 1])
            spans.append((k, start, start + len(e)))
            start += len(e)
        dst = np.concatenate(dsts)
        alpha = T.softmax_segments(T.concat_rows(logits), dst, g.node_counts[t])
        return spans, dst, alpha, T.concat_rows(values)

    def layer(self, l, x, g):
        p = self.params
        out = {}
        for t in self.node_types:
            n = g.node_counts[t]
            heads = []
            for h in range(self.config.heads):
                att = self.attention(l, t, h, x, g)
                if att is None:
                    heads.append(T.tensor(np.zeros((n, self.config.hidden_dim // self.config.heads))))
                    continue
                _, dst, alpha, values = att
                heads.append(T.scatter_add_rows(T.scale_rows(values, alpha), dst, n))
            agg = T.concat_cols(heads)
            out[t] = T.add(T.add(T.matmul(agg, p[f"hgt{l}.{t}.Out"]), p[f"hgt{l}.{t}.Out_b"]), x[t])
        return out


_ENCODERS = {"sage": SageEncoder, "gat": GatEncoder, "hgt": HgtEncoder}


def build_encoder(graph: HeteroGraph | MessageGraph, config: EncoderConfig,
                  in_dim: int | None = None) -> _Encoder:
    if isinstance(graph, HeteroGraph):
        node_types, edge_types = list(graph.node_types), list(graph.edge_types)
    else:
        node_types, edge_types = list(graph.node_counts), list(graph.edges)
    return _ENCODERS[config.architecture](node_types, edge_types, config, in_dim)


def encode(graph: MessageGraph, x0: dict[str, T.Tensor], config: EncoderConfig | None = None,
           encoder: _Encoder | None = None) -> dict[str, T.Tensor]:
    """Run ``config.layers`` layers; ``layers == 0`` returns the inputs unchanged."""
    if encoder is None:
        encoder = build_encoder(graph, config or EncoderConfig())
    return encoder(x0, graph)
