"""Desk-scale synthetic knowledge graphs with planted community structure."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph_builder import EdgeTypeSchema, HeteroGraph, NodeTypeSchema
from .rdf_store import RDF_TYPE, XSD, TermValue, Triple

BASE = "http://example.org/"
VOCAB = BASE + "vocab#"
PROFILES = ("scholarly", "tasks")

# per-community topical vocabularies; the generic pool is shared
_TOPICS = [
    ["ontology", "reasoning", "description", "logic", "axiom", "owl", "semantic", "inference"],
    ["graph", "neural", "embedding", "message", "attention", "node", "representation", "layer"],
    ["query", "sparql", "federation", "endpoint", "optimization", "linked", "index", "join"],
    ["recommendation", "user", "preference", "ranking", "collaborative", "item", "rating", "implicit"],
    ["vision", "image", "segmentation", "detection", "pixel", "convolution", "object", "scene"],
    ["language", "translation", "token", "corpus", "parsing", "sentence", "lexical", "grammar"],
]
_GENERIC = ["approach", "study", "method", "novel", "framework", "analysis", "evaluation",
            "data", "results", "system", "towards", "efficient", "model", "large", "scale"]
_INSTITUTES = [("Institute of Logic", "Knowledge Lab"), ("Graph Learning Group", "Neural Systems Lab"),
               ("Query Systems Lab", "Data Federation Group"), ("Recommender Lab", "User Modelling Group"),
               ("Vision Group", "Imaging Lab"), ("Language Lab", "Speech Group")]
_FIRST = ["Ada", "Alan", "Grace", "Tim", "Ora", "Jim", "Ruth", "Kurt", "Emmy", "John", "Lise",
          "Niels", "Rosa", "Max", "Hedy", "Carl"]
_LAST = ["Smith", "Berners", "Lovelace", "Hopper", "Turing", "Noether", "Meitner", "Bohr",
         "Curie", "Planck", "Franklin", "Gauss", "Euler", "Riemann", "Hilbert", "Cantor"]


def _iri(local: str) -> TermValue:
    return TermValue.iri(BASE + local)


def _prop(name: str) -> TermValue:
    return TermValue.iri(VOCAB + name)


def _typed(v, dt: str) -> TermValue:
    return TermValue.literal(str(v), datatype=XSD + dt)


def _text(rng: np.random.Generator, community: int, n_topic: int, n_generic: int) -> str:
    topic = _TOPICS[community % len(_TOPICS)]
    words = list(rng.choice(topic, size=n_topic)) + list(rng.choice(_GENERIC, size=n_generic))
    rng.shuffle(words)
    return " ".join(words).capitalize()


@dataclass
class SyntheticKG:
    triples: list[Triple]
    communities: dict[str, int]
    profile: str
    seed: int

    def sidecar(self) -> dict:
        return {"profile": self.profile, "seed": self.seed, "communities": self.communities}


def _bernoulli_edges(rng, left, right, comm, p_in, p_out, weight=None):
    """Block-model edges; ``weight`` scales each right node's probability (mean 1)."""
    w = np.ones(len(right)) if weight is None else np.asarray(weight, dtype=float)
    right_comm = np.array([comm[b] for b in right])
    pairs = []
    for a in left:
        probs = np.minimum(1.0, np.where(right_comm == comm[a], p_in, p_out) * w)
        hits = np.nonzero(rng.random(len(right)) < probs)[0]
        pairs.extend((a, right[j]) for j in hits)
    return pairs


def activity_weights(rng: np.random.Generator, n: int, shape: float, cap: float) -> np.ndarray:
    """Gamma-distributed author activity with mean 1, capped at ``cap``."""
    if shape <= 0:
        return np.ones(n)
    w = rng.gamma(shape, 1.0 / shape, size=n)
    for _ in range(50):
        w = np.minimum(w / w.mean(), cap)
    return w


def generate_scholarly(seed: int = 7, n_authors: int = 40, n_works: int = 300,
                       n_venues: int = 16, n_concepts: int = 120, k: int = 4,
                       p_in: float = 0.3, p_out: float = 0.02, n_cites: int = 0,
                       activity_shape: float = 0.6, venue_noise: float = 1.0) -> SyntheticKG:
    """Miniature scholarly KG: authors, works, venues, concepts in ``k`` communities.

    Authorship is a block model (``p_in`` within a community, ``p_out`` across),
    optionally degree-corrected by a per-author activity level whose mean is 1.
    """
    rng = np.random.default_rng(seed)
    triples: list[Triple] = []
    comm: dict[str, int] = {}
    add = triples.append
    authors = [f"author/{i}" for i in range(n_authors)]
    works = [f"work/{i}" for i in range(n_works)]
    venues = [f"venue/{i}" for i in range(n_venues)]
    concepts = [f"concept/{i}" for i in range(n_concepts)]
    for group in (authors, works, venues, concepts):
        for i, node in enumerate(group):
            comm[node] = i % k
    activity = activity_weights(rng, n_authors, activity_shape, 1.0 / p_in)
    authorship = _bernoulli_edges(rng, works, authors, comm, p_in, p_out, activity)
    by_work: dict[str, list[str]] = {}
    n_works_of = dict.fromkeys(authors, 0)
    for w, a in authorship:
        by_work.setdefault(w, []).append(a)
        n_works_of[a] += 1

    rdf_type = TermValue.iri(RDF_TYPE)
    for node, act in zip(authors, activity):
        add(Triple(_iri(node), rdf_type, _prop("Author")))
        name = f"{rng.choice(_FIRST)} {rng.choice(_LAST)}"
        add(Triple(_iri(node), _prop("name"), TermValue.literal(name)))
        inst = _INSTITUTES[comm[node] % len(_INSTITUTES)][int(rng.integers(2))]
        add(Triple(_iri(node), _prop("affiliation"), TermValue.literal(inst)))
        # works outside this miniature graph also count
        count = n_works_of[node] + int(rng.poisson(10.0 * act))
        add(Triple(_iri(node), _prop("worksCount"), _typed(count, "integer")))
    for node in venues:
        add(Triple(_iri(node), rdf_type, _prop("Source")))
        add(Triple(_iri(node), _prop("displayName"),
                   TermValue.literal(_text(rng, comm[node], 2, 1) + " Conference")))
    for node in concepts:
        add(Triple(_iri(node), rdf_type, _prop("Concept")))
        add(Triple(_iri(node), _prop("label"), TermValue.literal(_text(rng, comm[node], 1, 0))))
        add(Triple(_iri(node), _prop("level"), _typed(int(rng.integers(0, 4)), "integer")))
    venue_of = {c: [v for v in venues if comm[v] == c] for c in range(k)}
    concept_of = {c: [x for x in concepts if comm[x] == c] for c in range(k)}
    for node in works:
        c = comm[node]
        add(Triple(_iri(node), rdf_type, _prop("Work")))
        add(Triple(_iri(node), _prop("title"), TermValue.literal(_text(rng, c, 4, 3))))
        add(Triple(_iri(node), _prop("abstract"), TermValue.literal(_text(rng, c, 10, 10))))
        add(Triple(_iri(node), _prop("publicationYear"),
                   _typed(int(rng.integers(2000, 2024)), "integer")))
        add(Triple(_iri(node), _prop("openAccess"),
                   _typed("true" if rng.random() < 0.5 else "false", "boolean")))
        cv = c if rng.random() >= venue_noise else int(rng.integers(k))
        add(Triple(_iri(node), _prop("publishedIn"), _iri(str(rng.choice(venue_of[cv])))))
        for _ in range(2):
            cc = c if rng.random() >= venue_noise else int(rng.integers(k))
            add(Triple(_iri(node), _prop("hasConcept"), _iri(str(rng.choice(concept_of[cc])))))
    for w, a in authorship:
        add(Triple(_iri(w), _prop("hasAuthor"), _iri(a)))
    # citations favour works sharing authors (self-citation), within the community
    for w in works:
        team = set(by_work.get(w, []))
        same = [x for x in works if comm[x] == comm[w] and x != w]
        overlap = np.array([len(team & set(by_work.get(x, []))) for x in same], dtype=float)
        order = np.lexsort((rng.random(len(same)), -overlap))
        for j in order[:n_cites]:
            add(Triple(_iri(w), _prop("cites"), _iri(same[j])))
    coauthors: dict[str, set[str]] = {a: set() for a in authors}
    for w in works:
        team = by_work.get(w, [])
        for i in range(len(team) - 1):
            coauthors[team[i]].add(team[i + 1])
    for a in authors:
        for b in sorted(coauthors[a]):
            add(Triple(_iri(a), _prop("coAuthor"), _iri(b)))
    return SyntheticKG(triples, comm, "scholarly", seed)


def generate_tasks(seed: int = 7, n_papers: int = 200, n_datasets: int = 60, n_tasks: int = 40,
                   n_methods: int = 60, k: int = 4, p_in: float = 0.3,
                   p_out: float = 0.02) -> SyntheticKG:
    """Machine-learning-papers KG: papers, datasets, tasks, methods in ``k`` communities."""
    rng = np.random.default_rng(seed)
    triples: list[Triple] = []
    comm: dict[str, int] = {}
    add = triples.append
    groups = {
        "Paper": [f"paper/{i}" for i in range(n_papers)],
        "Dataset": [f"dataset/{i}" for i in range(n_datasets)],
        "Task": [f"task/{i}" for i in range(n_tasks)],
        "Method": [f"method/{i}" for i in range(n_methods)],
    }
    rdf_type = TermValue.iri(RDF_TYPE)
    for cls, nodes in groups.items():
        for i, node in enumerate(nodes):
            comm[node] = i % k
            add(Triple(_iri(node), rdf_type, _prop(cls)))
            words = (10, 10) if cls == "Paper" else (3, 2)
            add(Triple(_iri(node), _prop("description"),
                       TermValue.literal(_text(rng, comm[node] + 2, *words))))
    for node in groups["Dataset"]:
        add(Triple(_iri(node), _prop("size"), _typed(int(rng.integers(100, 10**6)), "integer")))
    for node in groups["Paper"]:
        add(Triple(_iri(node), _prop("date"),
                   _typed(f"{int(rng.integers(2012, 2024))}-01-15", "date")))
    for d, t in _bernoulli_edges(rng, groups["Dataset"], groups["Task"], comm, p_in, p_out):
        add(Triple(_iri(d), _prop("hasTask"), _iri(t)))
    for p in groups["Paper"]:
        c = comm[p]
        for rel, pool in (("usesDataset", "Dataset"), ("hasTask", "Task"), ("usesMethod", "Method")):
            same = [x for x in groups[pool] if comm[x] == c]
            for target in rng.choice(same, size=2, replace=False):
                add(Triple(_iri(p), _prop(rel), _iri(str(target))))
    for m in groups["Method"]:
        same = [x for x in groups["Task"] if comm[x] == comm[m]]
        add(Triple(_iri(m), _prop("appliedTo"), _iri(str(rng.choice(same)))))
    return SyntheticKG(triples, comm, "tasks", seed)


def generate(profile: str, seed: int = 7) -> SyntheticKG:
    if profile == "scholarly":
        return generate_scholarly(seed)
    if profile == "tasks":
        return generate_tasks(seed)
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


def write_sidecar(kg: SyntheticKG, path) -> None:
    Path(path).write_text(json.dumps(kg.sidecar(), indent=2, sort_keys=True), encoding="utf-8")


def planted_toy_kg(n: int = 20) -> HeteroGraph:
    """Two blocks of ``n/2`` entities; ``pairedWith`` maps block A to block B one-to-one,
    ``pairedWith_inv`` maps it back."""
    half = n // 2
    members = [f"{BASE}toy/{i}" for i in range(n)]
    nt = NodeTypeSchema("Entity", VOCAB + "Entity", members)
    fwd = np.array([(i, i + half) for i in range(half)], dtype=np.int64)
    back = fwd[:, ::-1].copy()
    edges = {
        ("Entity", "pairedWith", "Entity"): EdgeTypeSchema(("Entity", "pairedWith", "Entity"),
                                                           VOCAB + "pairedWith", fwd),
        ("Entity", "pairedWith_inv", "Entity"): EdgeTypeSchema(("Entity", "pairedWith_inv", "Entity"),
                                                               VOCAB + "pairedWith_inv", back),
    }
    return HeteroGraph({"Entity": nt}, edges)


def planted_bipartite_toy(n: int = 40, seed: int = 0, p: float = 0.8) -> HeteroGraph:
    """``n`` users and ``n`` items in two blocks; ``likes`` edges only within a block,
    each present with probability ``p``."""
    rng = np.random.default_rng(seed)
    users = NodeTypeSchema("User", VOCAB + "User", [f"{BASE}user/{i}" for i in range(n)])
    items = NodeTypeSchema("Item", VOCAB + "Item", [f"{BASE}item/{i}" for i in range(n)])
    block = np.arange(n) % 2
    same = block[:, None] == block[None, :]
    hits = np.argwhere(same & (rng.random((n, n)) < p)).astype(np.int64)
    key, rkey = ("User", "likes", "Item"), ("Item", "likes_rev", "User")
    edges = {key: EdgeTypeSchema(key, VOCAB + "likes", hits),
             rkey: EdgeTypeSchema(rkey, VOCAB + "likes", hits[:, ::-1].copy(), reverse_of=key)}
    return HeteroGraph({"User": users, "Item": items}, edges)
