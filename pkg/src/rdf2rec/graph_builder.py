"""Conversion of a triple store into a typed heterogeneous graph with content features.

Node types come from ``rdf:type`` objects, edge types from object-property
triples grouped by endpoint types, and content features from datatype-property
literals encoded block by block.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from .rdf_store import RDF_TYPE, XSD, TermKind, TripleStore

log = logging.getLogger(__name__)

UNTYPED = "__untyped__"
REVERSE_SUFFIX = "_rev"

NUMERIC_DATATYPES = {XSD + t for t in (
    "integer", "int", "long", "short", "byte", "decimal", "double", "float",
    "nonNegativeInteger", "positiveInteger", "negativeInteger", "nonPositiveInteger",
    "unsignedInt", "unsignedLong", "unsignedShort", "unsignedByte")}
BOOLEAN_DATATYPES = {XSD + "boolean"}
DATETIME_DATATYPES = {XSD + t for t in ("date", "dateTime", "dateTimeStamp", "gYear", "gYearMonth")}


class LiteralKind(str, enum.Enum):
    STRING = "String"
    NUMERIC = "Numeric"
    BOOLEAN = "Boolean"
    CATEGORICAL = "Categorical"
    DATETIME = "DateTime"


EdgeKey = tuple[str, str, str]


@dataclass
class SchemaConfig:
    type_pins: dict[str, str] = field(default_factory=dict)
    nld_properties: list[str] = field(default_factory=list)
    symmetric_properties: list[str] = field(default_factory=list)
    keep_untyped: bool = False
    cat_threshold: int = 32
    nld_min_length: float = 20.0


@dataclass
class FeatureConfig:
    text_dim: int = 64
    seed: int = 0
    cat_threshold: int = 32


@dataclass
class NodeTypeSchema:
    type_name: str
    class_iri: str | None
    members: list[str]
    attribute_properties: list[tuple[str, LiteralKind]] = field(default_factory=list)
    nld_properties: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.index = {m: i for i, m in enumerate(self.members)}

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class EdgeTypeSchema:
    triple_key: EdgeKey
    predicate_iri: str
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    reverse_of: EdgeKey | None = None

    @property
    def is_reverse(self) -> bool:
        return self.reverse_of is not None

    @property
    def src(self) -> np.ndarray:
        return self.edges[:, 0]

    @property
    def dst(self) -> np.ndarray:
        return self.edges[:, 1]

    def __len__(self) -> int:
        return int(self.edges.shape[0])


@dataclass
class FeatureTable:
    values: np.ndarray
    provenance: str
    column_spec: list[dict] = field(default_factory=list)
    flags: frozenset[str] = frozenset()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] < 1:
            raise ValueError(f"feature table must be 2-d with dim >= 1, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature table contains NaN/Inf")
        if not self.column_spec:
            self.column_spec = [{"kind": self.provenance, "width": self.dim}]
        widths = sum(b["width"] for b in self.column_spec)
        if widths != self.dim:
            raise ValueError(f"column_spec widths sum to {widths}, table has dim {self.dim}")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def nld_block(self) -> np.ndarray | None:
        """Columns of the natural-language-description blocks, or None."""
        cols, start = [], 0
        for block in self.column_spec:
            if block.get("nld"):
                cols.extend(range(start, start + block["width"]))
            start += block["width"]
        return self.values[:, cols] if cols else None


@dataclass
class GraphSchema:
    node_types: dict[str, NodeTypeSchema]
    edge_types: dict[EdgeKey, EdgeTypeSchema]
    assignment: dict[str, str]
    report: dict


@dataclass
class HeteroGraph:
    node_types: dict[str, NodeTypeSchema]
    edge_types: dict[EdgeKey, EdgeTypeSchema]
    content_features: dict[str, FeatureTable] = field(default_factory=dict)
    topology_features: dict[str, FeatureTable] = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    def num_nodes(self, type_name: str) -> int:
        return len(self.node_types[type_name])

    def forward_edge_types(self) -> list[EdgeKey]:
        return [k for k, e in self.edge_types.items() if not e.is_reverse]

    def reverse_key(self, key: EdgeKey) -> EdgeKey | None:
        for k, e in self.edge_types.items():
            if e.reverse_of == key:
                return k
        return None

    def locate(self, node_key: str) -> tuple[str, int]:
        for name, nt in self.node_types.items():
            if node_key in nt.index:
                return name, nt.index[node_key]
        raise KeyError(node_key)


# -------------------------------------------------------------- schema step

def local_name(iri: str) -> str:
    tail = re.split(r"[#/:]", iri.rstrip("/#"))[-1]
    name = re.sub(r"[^0-9A-Za-z_]+", "_", tail).strip("_")
    return name or "x"


def _unique_names(iris: Iterable[str], pins: dict[str, str]) -> dict[str, str]:
    names: dict[str, str] = {}
    used: set[str] = set(pins.values())
    for iri in sorted(iris):
        if iri in pins:
            names[iri] = pins[iri]
            continue
        base = local_name(iri)
        name, k = base, 2
        while name in used:
            name, k = f"{base}_{k}", k + 1
        used.add(name)
        names[iri] = name
    return names


def _parse_float(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _parse_bool(text: str) -> float | None:
    t = text.strip().lower()
    if t in ("true", "1"):
        return 1.0
    if t in ("false", "0"):
        return 0.0
    return None


def _parse_datetime(text: str) -> float | None:
    t = text.strip()
    if re.fullmatch(r"-?\d{4}", t):
        t = f"{t}-01-01"
    elif re.fullmatch(r"-?\d{4}-\d{2}", t):
        t = f"{t}-01"
    try:
        if len(t) == 10:
            d = date.fromisoformat(t)
            dt = datetime(d.year, d.month, d.day, tzinfo=timezone.utc)
        else:
            dt = datetime.fromisoformat(t.replace("Z", "+00:00"))
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
    except ValueError:
        return None
    return dt.timestamp()


def _infer_literal_kind(values: list[tuple[str, str | None]], is_nld_listed: bool,
                        config: SchemaConfig) -> tuple[LiteralKind, bool]:
    """Literal kind for one (type, property) and whether it is an NLD source."""
    datatypes = {dt for _, dt in values}
    lexicals = [lex for lex, _ in values]
    if not is_nld_listed:
        if datatypes & NUMERIC_DATATYPES:
            return LiteralKind.NUMERIC, False
        if datatypes & BOOLEAN_DATATYPES:
            return LiteralKind.BOOLEAN, False
        if datatypes & DATETIME_DATATYPES:
            return LiteralKind.DATETIME, False
        if all(_parse_bool(x) is not None for x in lexicals) and \
                all(x.strip().lower() in ("true", "false") for x in lexicals):
            return LiteralKind.BOOLEAN, False
        if all(_parse_float(x) is not None for x in lexicals):
            return LiteralKind.NUMERIC, False
        if all(re.fullmatch(r"-?\d{4}-\d{2}-\d{2}.*", x.strip()) and _parse_datetime(x) is not None
               for x in lexicals):
            return LiteralKind.DATETIME, False
    mean_len = sum(len(x) for x in lexicals) / max(len(lexicals), 1)
    if is_nld_listed or mean_len >= config.nld_min_length:
        return LiteralKind.STRING, True
    distinct = len(set(lexicals))
    if distinct <= config.cat_threshold and distinct < len(lexicals):
        return LiteralKind.CATEGORICAL, False
    return LiteralKind.STRING, False


def infer_schema(store: TripleStore, config: SchemaConfig | None = None) -> GraphSchema:
    """Derive node types, attribute properties and (empty) edge types."""
    config = config or SchemaConfig()
    classes_of: dict[str, list[str]] = {}
    order: list[str] = []
    class_count: Counter = Counter()
    for t in store.with_predicate(RDF_TYPE):
        if not t.object.is_resource:
            continue
        node = t.subject.key
        cls = t.object.key
        if node not in classes_of:
            classes_of[node] = []
            order.append(node)
        if cls not in classes_of[node]:
            classes_of[node].append(cls)
            class_count[cls] += 1
    if config.type_pins:
        pinned = set(config.type_pins)
        for node in order:
            kept = [c for c in classes_of[node] if c in pinned]
            if kept:
                classes_of[node] = kept

    assignment_iri: dict[str, str] = {}
    for node in order:
        cands = classes_of[node]
        assignment_iri[node] = min(cands, key=lambda c: (class_count[c], c))
    names = _unique_names(set(assignment_iri.values()), config.type_pins)
    assignment = {n: names[c] for n, c in assignment_iri.items()}

    # resources reachable through object properties but lacking rdf:type
    untyped: list[str] = []
    seen_untyped: set[str] = set()
    for t in store:
        if t.predicate.lexical == RDF_TYPE:
            continue
        ends = [t.subject] + ([t.object] if t.object.is_resource else [])
        for term in ends:
            k = term.key
            if k not in assignment and k not in seen_untyped:
                seen_untyped.add(k)
                untyped.append(k)
    if config.keep_untyped and untyped:
        for k in untyped:
            assignment[k] = UNTYPED

    members: dict[str, list[str]] = defaultdict(list)
    for node in order:
        members[assignment[node]].append(node)
    if config.keep_untyped and untyped:
        members[UNTYPED].extend(untyped)
    class_of_name = {v: k for k, v in names.items()}

    # attribute properties per subject type
    literal_values: dict[tuple[str, str], list[tuple[str, str | None]]] = defaultdict(list)
    edge_groups: dict[tuple[str, str, str], int] = {}
    for t in store:
        p = t.predicate.lexical
        if p == RDF_TYPE:
            continue
        s_type = assignment.get(t.subject.key)
        if s_type is None:
            continue
        if t.object.is_resource:
            o_type = assignment.get(t.object.key)
            if o_type is not None:
                edge_groups.setdefault((p, s_type, o_type), len(edge_groups))
        else:
            literal_values[(s_type, p)].append((t.object.lexical, t.object.datatype))

    nld_listed = set(config.nld_properties)
    node_types: dict[str, NodeTypeSchema] = {}
    for name in sorted(members):
        attrs, nlds = [], []
        for (s_type, p) in sorted(k for k in literal_values if k[0] == name):
            kind, is_nld = _infer_literal_kind(literal_values[(s_type, p)], p in nld_listed, config)
            attrs.append((p, kind))
            if is_nld:
                nlds.append(p)
        node_types[name] = NodeTypeSchema(name, class_of_name.get(name), list(members[name]),
                                          attrs, nlds)

    rel_labels = _unique_names({p for p, _, _ in edge_groups}, {})
    edge_types: dict[EdgeKey, EdgeTypeSchema] = {}
    for (p, s_type, o_type) in sorted(edge_groups):
        key = (s_type, rel_labels[p], o_type)
        edge_types[key] = EdgeTypeSchema(key, p)

    report = {
        "untyped_resources": len(untyped),
        "untyped_kept": bool(config.keep_untyped),
        "multi_typed_resources": sum(1 for n in order if len(classes_of[n]) > 1),
    }
    return GraphSchema(node_types, edge_types, assignment, report)


def build_hetero_graph(store: TripleStore, schema: GraphSchema,
                       config: SchemaConfig | None = None) -> HeteroGraph:
    """Populate deduplicated edge lists and add reverse edge types."""
    config = config or SchemaConfig()
    by_pred: dict[tuple[str, str, str], EdgeKey] = {
        (e.predicate_iri, k[0], k[2]): k for k, e in schema.edge_types.items()}
    pairs: dict[EdgeKey, dict[tuple[int, int], None]] = {k: {} for k in schema.edge_types}
    dropped = 0
    for t in store:
        p = t.predicate.lexical
        if p == RDF_TYPE or not t.object.is_resource:
            continue
        s_type = schema.assignment.get(t.subject.key)
        o_type = schema.assignment.get(t.object.key)
        if s_type is None or o_type is None:
            dropped += 1
            continue
        key = by_pred[(p, s_type, o_type)]
        s = schema.node_types[s_type].index[t.subject.key]
        o = schema.node_types[o_type].index[t.object.key]
        pairs[key][(s, o)] = None

    symmetric = set(config.symmetric_properties)
    edge_types: dict[EdgeKey, EdgeTypeSchema] = {}
    for key, etype in schema.edge_types.items():
        arr = np.array(list(pairs[key]), dtype=np.int64).reshape(-1, 2)
        edge_types[key] = EdgeTypeSchema(key, etype.predicate_iri, arr)
    for key in list(edge_types):
        src, rel, dst = key
        if src == dst and edge_types[key].predicate_iri in symmetric:
            continue
        rkey = (dst, rel + REVERSE_SUFFIX, src)
        edge_types[rkey] = EdgeTypeSchema(rkey, edge_types[key].predicate_iri,
                                          edge_types[key].edges[:, ::-1].copy(), reverse_of=key)
    report = dict(schema.report)
    report["dropped_object_triples"] = dropped
    report["edge_counts"] = {"__".join(k): len(e) for k, e in edge_types.items()}
    report["node_counts"] = {k: len(v) for k, v in schema.node_types.items()}
    return HeteroGraph(dict(schema.node_types), edge_types, report=report)


# ------------------------------------------------------------ text hashing

_TOKEN = re.compile(r"[0-9a-z]+")


def _hash64(feature: str, seed: int) -> int:
    digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=8,
                             salt=int(seed).to_bytes(8, "little", signed=True)).digest()
    return int.from_bytes(digest, "little")


def embed_text(text: str, dim: int = 64, seed: int = 0) -> np.ndarray:
    """Signed feature-hashing embedding of tokens and character trigrams, unit norm."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    vec = np.zeros(dim)
    for token in _TOKEN.findall(text.lower()):
        feats = ["w:" + token] + ["c:" + token[i:i + 3] for i in range(len(token) - 2)]
        for f in feats:
            h = _hash64(f, seed)
            vec[h % dim] += 1.0 if (h >> 63) == 0 else -1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def random_text(rng: np.random.Generator, n_words: tuple[int, int] = (3, 12)) -> str:
    """Random pseudo-words, for probing hash collisions."""
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))
    words = []
    for _ in range(int(rng.integers(n_words[0], n_words[1] + 1))):
        length = int(rng.integers(3, 10))
        words.append("".join(rng.choice(letters, size=length)))
    return " ".join(words)


# --------------------------------------------------------- content features

def _minmax(col: np.ndarray, observed: np.ndarray) -> np.ndarray:
    out = np.zeros_like(col)
    if observed.any():
        lo, hi = col[observed].min(), col[observed].max()
        if hi > lo:
            out[observed] = (col[observed] - lo) / (hi - lo)
        else:
            out[observed] = 0.5
        out[~observed] = out[observed].mean()
    return out


def encode_literal_features(graph: HeteroGraph, store: TripleStore,
                            config: FeatureConfig | None = None) -> dict[str, FeatureTable]:
    """Content feature table per node type from its attribute properties."""
    config = config or FeatureConfig()
    values: dict[tuple[str, str], dict[int, list[str]]] = defaultdict(lambda: defaultdict(list))
    locate = {}
    for name, nt in graph.node_types.items():
        for m, i in nt.index.items():
            locate[m] = (name, i)
    for t in store:
        if t.object.kind is not TermKind.LITERAL:
            continue
        hit = locate.get(t.subject.key)
        if hit is not None:
            values[(hit[0], t.predicate.lexical)][hit[1]].append(t.object.lexical)

    tables: dict[str, FeatureTable] = {}
    for name, nt in graph.node_types.items():
        n = len(nt)
        if not nt.attribute_properties:
            tables[name] = FeatureTable(np.zeros((n, 1)), "Content",
                                        [{"kind": "Empty", "width": 1}],
                                        frozenset({"content_empty"}))
            continue
        blocks, spec = [], []
        for prop, kind in nt.attribute_properties:
            per_node = values[(name, prop)]
            entry = {"property": prop, "kind": kind.value, "nld": prop in nt.nld_properties}
            if kind in (LiteralKind.NUMERIC, LiteralKind.DATETIME, LiteralKind.BOOLEAN):
                parse = {LiteralKind.NUMERIC: _parse_float, LiteralKind.DATETIME: _parse_datetime,
                         LiteralKind.BOOLEAN: _parse_bool}[kind]
                col = np.zeros(n)
                observed = np.zeros(n, dtype=bool)
                for i, lexs in per_node.items():
                    parsed = [v for v in map(parse, lexs) if v is not None]
                    if parsed:
                        col[i] = float(np.mean(parsed))
                        observed[i] = True
                if kind is LiteralKind.BOOLEAN:
                    col[~observed] = 0.5
                else:
                    col = _minmax(col, observed)
                blocks.append(col.reshape(-1, 1))
                entry["width"] = 1
            elif kind is LiteralKind.CATEGORICAL:
                cats = sorted({v for lexs in per_node.values() for v in lexs})
                pos = {c: j for j, c in enumerate(cats)}
                block = np.zeros((n, len(cats)))
                for i, lexs in per_node.items():
                    for v in lexs:
                        block[i, pos[v]] = 1.0
                blocks.append(block)
                entry["width"] = len(cats)
                entry["categories"] = cats
            else:
                block = np.zeros((n, config.text_dim))
                for i, lexs in per_node.items():
                    block[i] = embed_text(" ".join(lexs), config.text_dim, config.seed)
                blocks.append(block)
                entry["width"] = config.text_dim
                entry["encoder"] = "hashing"
            spec.append(entry)
        tables[name] = FeatureTable(np.hstack(blocks), "Content", spec)
    return tables


def import_external_embeddings(graph: HeteroGraph, path) -> dict[str, FeatureTable]:
    """Replace the String blocks of content features with vectors read from a TSV file.

    Rows are ``node_iri<TAB>v1 ... vd``.  Per node type, all String blocks
    collapse into one block of width d; nodes absent from the file keep their
    built-in vectors when the width is unchanged and get zeros otherwise.
    """
    vectors: dict[str, np.ndarray] = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            vals = np.array([float(v) for v in parts[1:]])
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"row {lineno}: expected {width} values, got {len(vals)}")
            vectors[parts[0]] = vals
    tables = dict(graph.content_features)
    if not vectors:
        return tables
    hits: dict[str, list[tuple[int, np.ndarray]]] = defaultdict(list)
    for iri, vec in vectors.items():
        try:
            type_name, idx = graph.locate(iri)
        except KeyError:
            log.warning("external embedding for unknown node %s skipped", iri)
            continue
        hits[type_name].append((idx, vec))
    for type_name, rows in hits.items():
        table = tables[type_name]
        kept_blocks, kept_spec, old_string, start = [], [], [], 0
        was_nld = False
        for block in table.column_spec:
            cols = table.values[:, start:start + block["width"]]
            start += block["width"]
            if block.get("kind") == LiteralKind.STRING.value:
                old_string.append(cols)
                was_nld = was_nld or bool(block.get("nld"))
            elif block.get("kind") != "Empty":
                kept_blocks.append(cols)
                kept_spec.append(block)
        n = table.rows
        old = np.hstack(old_string) if old_string else np.zeros((n, 0))
        new = old.copy() if old.shape[1] == width else np.zeros((n, width))
        for idx, vec in rows:
            new[idx] = vec
        entry = {"kind": LiteralKind.STRING.value, "width": width, "encoder": "external",
                 "nld": was_nld or not old_string, "source": str(path)}
        tables[type_name] = FeatureTable(np.hstack(kept_blocks + [new]), table.provenance,
                                         kept_spec + [entry])
    return tables


def convert(store: TripleStore, schema_config: SchemaConfig | None = None,
            feature_config: FeatureConfig | None = None) -> HeteroGraph:
    """Full pipeline: schema, edges, content features."""
    schema_config = schema_config or SchemaConfig()
    feature_config = feature_config or FeatureConfig(cat_threshold=schema_config.cat_threshold)
    schema = infer_schema(store, schema_config)
    graph = build_hetero_graph(store, schema, schema_config)
    graph.content_features = encode_literal_features(graph, store, feature_config)
    return graph


# --------------------------------------------------------- dataset on disk

def _fmt(v: float) -> str:
    return repr(float(v))


def edge_file_name(key: EdgeKey) -> str:
    return f"edges_{key[0]}__{key[1]}__{key[2]}.csv"


def write_dataset(graph: HeteroGraph, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, nt in graph.node_types.items():
        table = graph.content_features.get(name)
        with open(out / f"nodes_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            dim = table.dim if table is not None else 0
            w.writerow(["node_id", "iri"] + [f"c{j}" for j in range(dim)])
            for i, iri in enumerate(nt.members):
                row = [str(i), iri]
                if table is not None:
                    row += [_fmt(v) for v in table.values[i]]
                w.writerow(row)
    for key, et in graph.edge_types.items():
        with open(out / edge_file_name(key), "w", newline="", encoding="utf-8") as fh:
            fh.write("src,dst\n")
            for s, d in et.edges:
                fh.write(f"{int(s)},{int(d)}\n")
    schema = {
        "node_types": {
            name: {
                "class_iri": nt.class_iri,
                "count": len(nt),
                "attribute_properties": [[p, k.value] for p, k in nt.attribute_properties],
                "nld_properties": list(nt.nld_properties),
                "column_spec": graph.content_features[name].column_spec
                if name in graph.content_features else [],
                "flags": sorted(graph.content_features[name].flags)
                if name in graph.content_features else [],
            } for name, nt in graph.node_types.items()},
        "edge_types": [
            {"key": list(k), "predicate": et.predicate_iri, "count": len(et),
             "reverse_of": list(et.reverse_of) if et.reverse_of else None,
             "file": edge_file_name(k)}
            for k, et in graph.edge_types.items()],
    }
    with open(out / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(graph.report, fh, indent=2, sort_keys=True)


class DatasetError(ValueError):
    pass


def load_dataset(data_dir, with_embeddings: bool = True) -> HeteroGraph:
    """Read a dataset directory written by ``write_dataset``."""
    d = Path(data_dir)
    try:
        with open(d / "schema.json", encoding="utf-8") as fh:
            schema = json.load(fh)
        node_types, content = {}, {}
        for name, info in schema["node_types"].items():
            with open(d / f"nodes_{name}.csv", newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
            header, body = rows[0], rows[1:]
            if header[:2] != ["node_id", "iri"] or len(body) != info["count"]:
                raise DatasetError(f"nodes_{name}.csv does not match schema.json")
            members = [r[1] for r in body]
            node_types[name] = NodeTypeSchema(
                name, info.get("class_iri"), members,
                [(p, LiteralKind(k)) for p, k in info["attribute_properties"]],
                list(info["nld_properties"]))
            if len(header) > 2:
                vals = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), -1)
                content[name] = FeatureTable(vals, "Content", info["column_spec"],
                                             frozenset(info.get("flags", [])))
        edge_types = {}
        for info in schema["edge_types"]:
            key = tuple(info["key"])
            arr = np.loadtxt(d / info["file"], delimiter=",", skiprows=1, dtype=np.int64,
                             ndmin=2).reshape(-1, 2)
            rev = tuple(info["reverse_of"]) if info["reverse_of"] else None
            edge_types[key] = EdgeTypeSchema(key, info["predicate"], arr, reverse_of=rev)
        report = {}
        if (d / "report.json").exists():
            with open(d / "report.json", encoding="utf-8") as fh:
                report = json.load(fh)
    except (OSError, KeyError, ValueError, IndexError) as err:
        raise DatasetError(f"malformed dataset directory {d}: {err}") from err
    graph = HeteroGraph(node_types, edge_types, content, {}, report)
    if with_embeddings:
        topo = load_embeddings(graph, d)
        if topo is not None:
            graph.topology_features = topo
    return graph


def write_embeddings(graph: HeteroGraph, tables: dict[str, FeatureTable], out_dir) -> None:
    out = Path(out_dir)
    for name, table in tables.items():
        with open(out / f"embeddings_{name}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for iri, row in zip(graph.node_types[name].members, table.values):
                fh.write(iri + "\t" + "\t".join(_fmt(v) for v in row) + "\n")


def load_embeddings(graph: HeteroGraph, data_dir) -> dict[str, FeatureTable] | None:
    """Topology tables from ``embeddings_<type>.tsv``; None unless every type has one."""
    d = Path(data_dir)
    tables = {}
    for name, nt in graph.node_types.items():
        path = d / f"embeddings_{name}.tsv"
        if not path.exists():
            return None
        rows: dict[str, list[float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                rows[parts[0]] = [float(v) for v in parts[1:]]
        vals = np.array([rows[m] for m in nt.members])
        tables[name] = FeatureTable(vals, "Topology")
    return tables
