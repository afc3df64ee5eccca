"""Edge splitting, dot-product decoding and the end-to-end training loop."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .features import InitStrategy, InputEncoder
from .gnn import EncoderConfig, MessageGraph, build_encoder
from .graph_builder import EdgeKey, HeteroGraph
from .metrics import MetricsReport, compute_auc, evaluate_scores


@dataclass
class TrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    negatives: int = 1
    patience: int = 10
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.lr <= 0 or self.negatives < 1 or self.patience < 1:
            raise ValueError(f"invalid train config {self}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")


@dataclass
class TrainSplit:
    target: EdgeKey
    message_edges: dict[EdgeKey, np.ndarray]
    sup_train: np.ndarray
    sup_val: np.ndarray
    sup_test: np.ndarray
    neg_val: np.ndarray
    neg_test: np.ndarray
    seed: int = 0

    def sizes(self) -> dict[str, int]:
        return {"train": len(self.sup_train), "val": len(self.sup_val), "test": len(self.sup_test),
                "neg_val": len(self.neg_val), "neg_test": len(self.neg_test),
                "message_edges": int(sum(len(e) for e in self.message_edges.values()))}


class TrainingError(FloatingPointError):
    pass


def _pairs(arr: np.ndarray) -> set[tuple[int, int]]:
    return {(int(a), int(b)) for a, b in arr}


def corrupt_tails(pos: np.ndarray, n_tail: int, forbidden: set[tuple[int, int]],
                  rng: np.random.Generator, unique: bool = True, max_tries: int = 100) -> np.ndarray:
    """One negative per positive by uniform tail replacement, avoiding ``forbidden``."""
    taken = set(forbidden)
    out = np.empty_like(pos)
    for i, (h, _) in enumerate(pos):
        cand = (int(h), int(rng.integers(n_tail)))
        for _ in range(max_tries):
            if cand not in taken:
                break
            cand = (int(h), int(rng.integers(n_tail)))
        out[i] = cand
        if unique:
            taken.add(cand)
    return out


def split_edges(graph: HeteroGraph, target: EdgeKey, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> TrainSplit:
    """Transductive split of the target edge type with fixed 1:1 evaluation negatives."""
    target = tuple(target)
    if target not in graph.edge_types:
        raise KeyError(f"target edge type {target} not in graph")
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be positive and sum to 1, got {ratios}")
    edges = graph.edge_types[target].edges
    m = len(edges)
    if m < 10:
        raise ValueError(f"target edge type {target} has only {m} edges; need at least 10")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    n_val = int(math.floor(m * ratios[1]))
    n_test = int(math.floor(m * ratios[2]))
    n_train = m - n_val - n_test
    train = edges[perm[:n_train]]
    val = edges[perm[n_train:n_train + n_val]]
    test = edges[perm[n_train + n_val:]]
    message: dict[EdgeKey, np.ndarray] = {}
    for key, et in graph.edge_types.items():
        if key == target:
            message[key] = train.copy()
        elif et.reverse_of == target:
            message[key] = train[:, ::-1].copy()
        else:
            message[key] = et.edges.copy()
    positives = _pairs(edges)
    n_tail = graph.num_nodes(target[2])
    neg_val = corrupt_tails(val, n_tail, positives, rng)
    neg_test = corrupt_tails(test, n_tail, positives | _pairs(neg_val), rng)
    return TrainSplit(target, message, train, val, test, neg_val, neg_test, seed)


# ----------------------------------------------------------------- decoder

def dot_score(h_u, h_v) -> float:
    u = np.asarray(h_u, dtype=np.float64).reshape(-1)
    v = np.asarray(h_v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"dot_score: width mismatch {u.size} vs {v.size}")
    return float(u @ v)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def bce_loss(scores, labels) -> T.Tensor:
    """Mean binary cross-entropy on logits: ``softplus(s) - y s``."""
    s = scores if isinstance(scores, T.Tensor) else T.tensor(np.asarray(scores, dtype=np.float64).reshape(-1, 1))
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if s.shape[0] == 0:
        raise ValueError("bce_loss: empty input")
    if s.shape != y.shape:
        raise ValueError(f"bce_loss: {s.shape[0]} scores vs {y.shape[0]} labels")
    return T.mean(T.sub(T.softplus(s), T.mul(s, T.tensor(y))))


# ------------------------------------------------------------------- model

class LinkPredictor:
    """Input encoder, GNN encoder and dot-product decoder for one target edge type."""

    def __init__(self, graph: HeteroGraph, target: EdgeKey, strategy: InitStrategy | str,
                 encoder: EncoderConfig, seed: int = 0):
        self.graph = graph
        self.target = tuple(target)
        self.encoder_config = encoder
        self.inputs = InputEncoder(graph, strategy, encoder.hidden_dim, seed=seed)
        self.encoder = build_encoder(graph, encoder)
        self.frozen: dict[str, np.ndarray] | None = None

    def parameters(self) -> dict[str, T.Tensor]:
        params = dict(self.inputs.parameters())
        params.update(self.encoder.parameters())
        return params

    def embed(self, mg: MessageGraph) -> dict[str, T.Tensor]:
        return self.encoder(self.inputs(), mg)

    def score(self, h: dict[str, T.Tensor], pairs: np.ndarray) -> T.Tensor:
        src, _, dst = self.target
        return T.rowdot(T.gather_rows(h[src], pairs[:, 0]), T.gather_rows(h[dst], pairs[:, 1]))

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"checkpoint lacks parameters {sorted(missing)[:3]}...")
        for k, p in params.items():
            p.data = np.array(state[k], dtype=np.float64).copy()
        self.frozen = None

    def freeze(self, mg: MessageGraph) -> None:
        self.frozen = {t: v.data.copy() for t, v in self.embed(mg).items()}

    def _resolve(self, pairs) -> np.ndarray:
        if isinstance(pairs, np.ndarray) and pairs.dtype.kind in "iu":
            return pairs.reshape(-1, 2)
        src, _, dst = self.target
        out = []
        for u, v in pairs:
            if isinstance(u, str) or isinstance(v, str):
                try:
                    ui = self.graph.node_types[src].index[u]
                except KeyError:
                    raise KeyError(f"unknown {src} node {u!r}") from None
                try:
                    vi = self.graph.node_types[dst].index[v]
                except KeyError:
                    raise KeyError(f"unknown {dst} node {v!r}") from None
                out.append((ui, vi))
            else:
                out.append((int(u), int(v)))
        return np.array(out, dtype=np.int64).reshape(-1, 2)


def predict(model: LinkPredictor, pairs, mg: MessageGraph | None = None) -> np.ndarray:
    """Edge probabilities ``sigmoid(h_u · h_v)`` from frozen embeddings."""
    idx = model._resolve(pairs)
    if model.frozen is None:
        if mg is None:
            raise ValueError("model has no frozen embeddings; pass the message graph")
        model.freeze(mg)
    src, _, dst = model.target
    hu = model.frozen[src][idx[:, 0]]
    hv = model.frozen[dst][idx[:, 1]]
    return sigmoid(np.einsum("ij,ij->i", hu, hv))


def _eval_probs(model: LinkPredictor, h: dict[str, T.Tensor], pos: np.ndarray, neg: np.ndarray):
    pairs = np.vstack([pos, neg])
    s = model.score(h, pairs).data[:, 0]
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return sigmoid(s), labels


def train(graph: HeteroGraph, split: TrainSplit, strategy: InitStrategy | str,
          encoder: EncoderConfig, config: TrainConfig | None = None) -> tuple[LinkPredictor, list[dict]]:
    """Adam training with per-epoch negatives; keeps the best-validation parameters."""
    config = config or TrainConfig()
    model = LinkPredictor(graph, split.target, strategy, encoder, seed=config.seed)
    mg = MessageGraph.from_graph(graph, split.message_edges)
    curve: list[dict] = []
    if config.epochs == 0:
        model.freeze(mg)
        return model, curve
    params = model.parameters()
    opt = T.Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed + 7919)
    n_tail = graph.num_nodes(split.target[2])
    train_pos = _pairs(split.sup_train)
    pos = np.repeat(split.sup_train, config.negatives, axis=0)
    labels = np.concatenate([np.ones(len(split.sup_train)), np.zeros(len(pos))])
    best_auc, best_state, since_best = -1.0, model.state(), 0

    def consider(h, epoch):
        nonlocal best_auc, best_state, since_best
        probs, y = _eval_probs(model, h, split.sup_val, split.neg_val)
        auc = compute_auc(probs, y)
        if auc > best_auc:
            best_auc, best_state, since_best = auc, model.state(), 0
        else:
            since_best += 1
        return auc

    for epoch in range(1, config.epochs + 1):
        negs = corrupt_tails(pos, n_tail, train_pos, rng, unique=False)
        opt.zero_grad()
        h = model.embed(mg)
        val_auc = consider(h, epoch)
        scores = model.score(h, np.vstack([split.sup_train, negs]))
        loss = bce_loss(scores, labels)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss at epoch {epoch} (lr={config.lr})")
        loss.backward()
        try:
            opt.step()
        except T.NonFiniteError as err:
            raise TrainingError(f"{err} at epoch {epoch}") from err
        model.inputs.after_step()
        curve.append({"epoch": epoch, "loss": value, "val_auc": val_auc})
        if since_best >= config.patience:
            break
    else:
        consider(model.embed(mg), config.epochs + 1)
    model.load_state(best_state)
    model.freeze(mg)
    return model, curve


def evaluate(model: LinkPredictor, split: TrainSplit, threshold: float = 0.5,
             fingerprint: dict | None = None) -> MetricsReport:
    """Test-set metrics on sup_test positives and the fixed test negatives."""
    if model.frozen is None:
        model.freeze(MessageGraph.from_graph(model.graph, split.message_edges))
    pos_p = predict(model, split.sup_test)
    neg_p = predict(model, split.neg_test)
    probs = np.concatenate([pos_p, neg_p])
    labels = np.concatenate([np.ones(len(pos_p)), np.zeros(len(neg_p))])
    return evaluate_scores(probs, labels, threshold, fingerprint)


def save_checkpoint(model: LinkPredictor, path) -> None:
    np.savez(path, **{k.replace("/", "_"): v for k, v in model.state().items()})


def load_checkpoint(model: LinkPredictor, path) -> None:
    with np.load(path) as data:
        model.load_state({k: data[k] for k in data.files})
