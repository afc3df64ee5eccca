import pytest

from rdf2rec.graph_builder import convert
from rdf2rec.kge import KgeTrainConfig, train_kge
from rdf2rec.rdf_store import TripleStore
from rdf2rec.synthetic import generate_scholarly


def small_graph(seed: int = 3):
    """Tiny scholarly graph with content features and short-trained topology features."""
    kg = generate_scholarly(seed, n_authors=8, n_works=12, n_venues=4, n_concepts=8, n_cites=2,
                            activity_shape=0.0, venue_noise=0.0)
    g = convert(TripleStore.from_triples(kg.triples))
    _, tables, _ = train_kge(g, KgeTrainConfig(dim=6, epochs=2, seed=seed))
    g.topology_features = tables
    return g


@pytest.fixture(scope="session")
def tiny_graph():
    return small_graph()
