"""Knowledge graph embeddings (TransE, DistMult, ComplEx, RotatE) for topology features."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .graph_builder import EdgeKey, FeatureTable, HeteroGraph

VARIANTS = ("transe", "distmult", "complex", "rotate")
MARGIN_VARIANTS = ("transe", "rotate")


@dataclass
class KgeTrainConfig:
    model: str = "transe"
    dim: int = 64
    epochs: int = 100
    lr: float = 0.01
    negatives: int = 1
    margin: float = 1.0
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        self.model = self.model.lower()
        if self.model not in VARIANTS:
            raise ValueError(f"unknown KGE model {self.model!r}; expected one of {VARIANTS}")
        if self.dim < 1 or self.epochs < 0 or self.lr <= 0 or self.negatives < 1 \
                or self.margin <= 0 or self.batch_size < 1:
            raise ValueError(f"invalid KGE config {self}")


@dataclass
class KgeModel:
    variant: str
    dim: int
    entity: np.ndarray
    relation: np.ndarray
    node_offsets: dict[str, int] = field(default_factory=dict)
    relation_keys: list[EdgeKey] = field(default_factory=list)
    seed: int = 0

    def entity_id(self, node_type: str, index: int) -> int:
        return self.node_offsets[node_type] + index

    def relation_id(self, key: EdgeKey) -> int:
        return self.relation_keys.index(tuple(key))


class KgeTrainingError(FloatingPointError):
    pass


# ---------------------------------------------------------------- scoring

def score_arrays(variant: str, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Scores for aligned rows of head, relation and tail parameters (higher is better)."""
    if variant == "transe":
        return -np.linalg.norm(h + r - t, axis=-1)
    if variant == "distmult":
        # h*t first so that swapping head and tail is bit-exact
        return np.sum((h * t) * r, axis=-1)
    d = h.shape[-1] // 2
    hr, hi = h[..., :d], h[..., d:]
    tr, ti = t[..., :d], t[..., d:]
    if variant == "complex":
        rr, ri = r[..., :d], r[..., d:]
        return np.sum(hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr, axis=-1)
    if variant == "rotate":
        c, s = np.cos(r), np.sin(r)
        re = hr * c - hi * s - tr
        im = hr * s + hi * c - ti
        return -np.sqrt(np.sum(re * re + im * im, axis=-1))
    raise ValueError(f"unknown variant {variant!r}")


def score_triple(model: KgeModel, h: int, r: int, t: int) -> float:
    return float(score_arrays(model.variant, model.entity[h], model.relation[r], model.entity[t]))


def score_tensor(variant: str, ent: T.Tensor, rel: T.Tensor, h, r, t) -> T.Tensor:
    """Differentiable batched scores, shape (m, 1)."""
    eh, er, et = T.gather_rows(ent, h), T.gather_rows(rel, r), T.gather_rows(ent, t)
    if variant == "transe":
        return T.neg(T.l2_norm_rows(T.sub(T.add(eh, er), et)))
    if variant == "distmult":
        return T.rowdot(T.mul(eh, et), er)
    d = ent.shape[1] // 2
    hr, hi = T.slice_cols(eh, 0, d), T.slice_cols(eh, d, 2 * d)
    tr, ti = T.slice_cols(et, 0, d), T.slice_cols(et, d, 2 * d)
    if variant == "complex":
        rr, ri = T.slice_cols(er, 0, d), T.slice_cols(er, d, 2 * d)
        return T.sum(T.concat_cols([
            T.mul(T.mul(hr, rr), tr), T.mul(T.mul(hi, rr), ti),
            T.mul(T.mul(hr, ri), ti), T.neg(T.mul(T.mul(hi, ri), tr))]), axis=1)
    if variant == "rotate":
        c, s = T.cos(er), T.sin(er)
        re = T.sub(T.sub(T.mul(hr, c), T.mul(hi, s)), tr)
        im = T.sub(T.add(T.mul(hr, s), T.mul(hi, c)), ti)
        return T.neg(T.l2_norm_rows(T.concat_cols([re, im])))
    raise ValueError(f"unknown variant {variant!r}")


def kge_loss(variant: str, pos: T.Tensor, neg: T.Tensor, margin: float = 1.0) -> T.Tensor:
    """Summed margin-ranking (TransE/RotatE) or logistic (DistMult/ComplEx) loss."""
    if variant in MARGIN_VARIANTS:
        return T.sum(T.relu(T.add(T.sub(neg, pos), margin)))
    return T.add(T.sum(T.softplus(T.neg(pos))), T.sum(T.softplus(neg)))


# ------------------------------------------------------- negative sampling

class NegativeSampler:
    """Type-respecting corruption of (head, relation, tail) triples.

    Triples use per-type local node indices and a relation position into
    ``keys``; corruption draws uniformly from the node type of the replaced side.
    """

    max_tries = 100

    def __init__(self, graph: HeteroGraph, keys: list[EdgeKey]):
        self.keys = list(keys)
        self.sizes = [(graph.num_nodes(k[0]), graph.num_nodes(k[2])) for k in self.keys]
        self.positives: list[set[tuple[int, int]]] = []
        for k in self.keys:
            e = graph.edge_types[k].edges
            self.positives.append({(int(a), int(b)) for a, b in e})

    def is_positive(self, h: int, r: int, t: int) -> bool:
        return (h, t) in self.positives[r]

    def sample(self, h: int, r: int, t: int, rng: np.random.Generator) -> tuple[tuple[int, int, int], bool, str]:
        """Return (corrupted triple, false_negative_possible, side)."""
        n_head, n_tail = self.sizes[r]
        cand = (h, r, t)
        side = "tail"
        for _ in range(self.max_tries):
            side = "head" if rng.random() < 0.5 else "tail"
            if side == "head" and n_head < 2:
                side = "tail"
            elif side == "tail" and n_tail < 2:
                side = "head"
            if side == "head":
                cand = (int(rng.integers(n_head)), r, t)
            else:
                cand = (h, r, int(rng.integers(n_tail)))
            if not self.is_positive(*cand):
                return cand, False, side
        return cand, True, side

    def sample_batch(self, triples: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        out = np.empty_like(triples)
        for i, (h, r, t) in enumerate(triples):
            out[i] = self.sample(int(h), int(r), int(t), rng)[0]
        return out


def negative_sample(positive: tuple[int, int, int], graph: HeteroGraph, rng: np.random.Generator,
                    keys: list[EdgeKey] | None = None):
    """Corrupt one triple; returns (triple, false_negative_possible)."""
    sampler = NegativeSampler(graph, keys or graph.forward_edge_types())
    cand, flag, _ = sampler.sample(*positive, rng)
    return cand, flag


# ---------------------------------------------------------------- training

def kge_triples(graph: HeteroGraph, keys: list[EdgeKey] | None = None) -> tuple[list[EdgeKey], np.ndarray]:
    """Asserted (non-reverse) edges as rows (head local, relation pos, tail local)."""
    keys = keys or graph.forward_edge_types()
    rows = []
    for r, k in enumerate(keys):
        e = graph.edge_types[k].edges
        if len(e):
            rows.append(np.column_stack([e[:, 0], np.full(len(e), r), e[:, 1]]))
    arr = np.vstack(rows) if rows else np.zeros((0, 3), dtype=np.int64)
    return keys, arr.astype(np.int64)


def init_model(graph: HeteroGraph, keys: list[EdgeKey], config: KgeTrainConfig) -> KgeModel:
    rng = np.random.default_rng(config.seed)
    offsets, total = {}, 0
    for name in graph.node_types:
        offsets[name] = total
        total += graph.num_nodes(name)
    width = 2 * config.dim if config.model in ("complex", "rotate") else config.dim
    bound = 6.0 / math.sqrt(config.dim)
    entity = rng.uniform(-bound, bound, size=(total, width))
    if config.model == "rotate":
        relation = rng.uniform(-math.pi, math.pi, size=(len(keys), config.dim))
    else:
        rwidth = 2 * config.dim if config.model == "complex" else config.dim
        relation = rng.uniform(-bound, bound, size=(len(keys), rwidth))
    return KgeModel(config.model, config.dim, entity, relation, offsets, list(keys), config.seed)


def _globalize(model: KgeModel, keys: list[EdgeKey], triples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h_off = np.array([model.node_offsets[k[0]] for k in keys])
    t_off = np.array([model.node_offsets[k[2]] for k in keys])
    r = triples[:, 1]
    return triples[:, 0] + h_off[r], r, triples[:, 2] + t_off[r]


def train_kge(graph: HeteroGraph, config: KgeTrainConfig | None = None,
              edge_keys: list[EdgeKey] | None = None) -> tuple[KgeModel, dict[str, FeatureTable], list[float]]:
    """Fit a KGE model on the non-reverse edges; returns (model, x_t tables, epoch losses)."""
    config = config or KgeTrainConfig()
    keys, triples = kge_triples(graph, edge_keys)
    if len(triples) == 0:
        raise ValueError("graph has no edges to train a KGE model on")
    model = init_model(graph, keys, config)
    rng = np.random.default_rng(config.seed + 1)
    sampler = NegativeSampler(graph, keys)
    ent = T.parameter(model.entity, "entity")
    rel = T.parameter(model.relation, "relation")
    opt = T.SGD({"entity": ent, "relation": rel}, lr=config.lr)
    losses: list[float] = []
    for epoch in range(config.epochs):
        if config.model == "transe":
            norms = np.linalg.norm(ent.data, axis=1, keepdims=True)
            ent.data /= np.where(norms > 0, norms, 1.0)
        order = rng.permutation(len(triples))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = triples[order[start:start + config.batch_size]]
            pos_rows = np.repeat(batch, config.negatives, axis=0)
            negs = sampler.sample_batch(pos_rows, rng)
            ph, pr, pt = _globalize(model, keys, pos_rows)
            nh, nr, nt = _globalize(model, keys, negs)
            opt.zero_grad()
            loss = kge_loss(config.model,
                            score_tensor(config.model, ent, rel, ph, pr, pt),
                            score_tensor(config.model, ent, rel, nh, nr, nt),
                            config.margin)
            value = loss.item()
            if not math.isfinite(value):
                raise KgeTrainingError(
                    f"non-finite KGE loss at epoch {epoch} (lr={config.lr}); lower the learning rate")
            loss.backward()
            try:
                opt.step()
            except T.NonFiniteError as err:
                raise KgeTrainingError(f"{err} at epoch {epoch} (lr={config.lr})") from err
            total += value
        losses.append(total / len(triples))
    model.entity = ent.data.copy()
    model.relation = rel.data.copy()
    return model, topology_tables(model, graph), losses


def topology_tables(model: KgeModel, graph: HeteroGraph) -> dict[str, FeatureTable]:
    tables = {}
    for name in graph.node_types:
        off = model.node_offsets[name]
        vals = model.entity[off:off + graph.num_nodes(name)]
        spec = [{"kind": "Topology", "model": model.variant, "width": vals.shape[1]}]
        tables[name] = FeatureTable(vals.copy(), "Topology", spec)
    return tables


def filtered_mrr(model: KgeModel, graph: HeteroGraph, triples: np.ndarray | None = None) -> float:
    """Filtered mean reciprocal rank of tail prediction, ties ranked pessimistically."""
    keys = model.relation_keys
    if triples is None:
        _, triples = kge_triples(graph, keys)
    sampler = NegativeSampler(graph, keys)
    rr = []
    for h, r, t in triples:
        k = keys[r]
        h_g = model.node_offsets[k[0]] + h
        off = model.node_offsets[k[2]]
        n_tail = graph.num_nodes(k[2])
        cands = model.entity[off:off + n_tail]
        scores = score_arrays(model.variant, np.broadcast_to(model.entity[h_g], cands.shape),
                              np.broadcast_to(model.relation[r], (n_tail, model.relation.shape[1])),
                              cands)
        true = scores[t]
        mask = np.ones(n_tail, dtype=bool)
        for cand in range(n_tail):
            if cand != t and sampler.is_positive(int(h), int(r), cand):
                mask[cand] = False
        mask[t] = False
        rank = 1 + int(np.sum(scores[mask] >= true))
        rr.append(1.0 / rank)
    return float(np.mean(rr))


# ----------------------------------------------------------- persistence

def save_model(model: KgeModel, path) -> None:
    payload = {
        "variant": model.variant, "d": model.dim, "seed": model.seed,
        "entity_shape": list(model.entity.shape), "relation_shape": list(model.relation.shape),
        "entity": model.entity.ravel().tolist(), "relation": model.relation.ravel().tolist(),
        "node_offsets": model.node_offsets, "relation_keys": [list(k) for k in model.relation_keys],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path) -> KgeModel:
    p = json.loads(Path(path).read_text(encoding="utf-8"))
    return KgeModel(
        p["variant"], p["d"],
        np.array(p["entity"], dtype=np.float64).reshape(p["entity_shape"]),
        np.array(p["relation"], dtype=np.float64).reshape(p["relation_shape"]),
        dict(p["node_offsets"]), [tuple(k) for k in p["relation_keys"]], p.get("seed", 0))
