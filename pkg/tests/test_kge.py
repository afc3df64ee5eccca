import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradcheck import TOL, max_grad_error
from rdf2rec import tensor as T
from rdf2rec.graph_builder import EdgeTypeSchema, HeteroGraph, NodeTypeSchema
from rdf2rec.kge import (VARIANTS, KgeModel, KgeTrainConfig, NegativeSampler, filtered_mrr,
                         kge_loss, kge_triples, init_model, load_model, negative_sample,
                         save_model, score_arrays, score_tensor, score_triple, train_kge)
from rdf2rec.synthetic import planted_toy_kg


def _model(variant, ent, rel):
    return KgeModel(variant, len(ent[0]), np.array(ent, float), np.array(rel, float))


def test_transe_exact_translation():
    m = _model("transe", [[1, 0], [1, 1]], [[0, 1]])
    assert score_triple(m, 0, 0, 1) == 0.0


def test_transe_norm():
    m = _model("transe", [[0, 0]], [[3, 4]])
    assert score_triple(m, 0, 0, 0) == -5.0


def test_distmult_formula():
    m = _model("distmult", [[1, 2], [2, 1]], [[1, 1]])
    assert score_triple(m, 0, 0, 1) == 4.0


def test_complex_matches_complex_arithmetic():
    rng = np.random.default_rng(0)
    h, r, t = (rng.normal(size=6) for _ in range(3))
    c = lambda v: v[:3] + 1j * v[3:]
    expected = np.real(np.sum(c(h) * c(r) * np.conj(c(t))))
    assert math.isclose(score_arrays("complex", h, r, t), expected, rel_tol=1e-12)


def test_rotate_matches_complex_rotation():
    rng = np.random.default_rng(1)
    h, t = rng.normal(size=6), rng.normal(size=6)
    phase = rng.uniform(-math.pi, math.pi, size=3)
    c = lambda v: v[:3] + 1j * v[3:]
    expected = -np.linalg.norm(c(h) * np.exp(1j * phase) - c(t))
    assert math.isclose(score_arrays("rotate", h, phase, t), expected, rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_transe_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    h, r, t, c = (rng.normal(size=8) for _ in range(4))
    assert abs(score_arrays("transe", h + c, r, t + c) - score_arrays("transe", h, r, t)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_distmult_symmetry(seed):
    rng = np.random.default_rng(seed)
    h, r, t = (rng.normal(size=8) for _ in range(3))
    assert score_arrays("distmult", h, r, t) == score_arrays("distmult", t, r, h)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_rotate_zero_phase(seed):
    rng = np.random.default_rng(seed)
    h, t = rng.normal(size=8), rng.normal(size=8)
    assert math.isclose(score_arrays("rotate", h, np.zeros(4), t), -np.linalg.norm(h - t),
                        rel_tol=1e-12)


def test_score_tensor_matches_arrays():
    rng = np.random.default_rng(2)
    for variant in VARIANTS:
        width = 8 if variant in ("complex", "rotate") else 4
        ent = rng.normal(size=(5, width))
        rel = rng.normal(size=(2, 4 if variant == "rotate" else width))
        h, r, t = np.array([0, 1, 4]), np.array([1, 0, 1]), np.array([2, 3, 0])
        got = score_tensor(variant, T.tensor(ent), T.tensor(rel), h, r, t).data[:, 0]
        assert np.allclose(got, score_arrays(variant, ent[h], rel[r], ent[t]), atol=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_loss_gradients(variant, seed):
    rng = np.random.default_rng(seed)
    width = 6 if variant in ("complex", "rotate") else 3
    ent = T.parameter(rng.normal(size=(6, width)))
    rel = T.parameter(rng.normal(size=(2, 3 if variant == "rotate" else width)))
    h, r, t = rng.integers(0, 6, 5), rng.integers(0, 2, 5), rng.integers(0, 6, 5)
    nh, nt = rng.integers(0, 6, 5), rng.integers(0, 6, 5)
    # margin large enough that every hinge stays active under the perturbation
    margin = 50.0

    def build():
        return kge_loss(variant, score_tensor(variant, ent, rel, h, r, t),
                        score_tensor(variant, ent, rel, nh, r, nt), margin)
    assert max_grad_error(build, {"ent": ent, "rel": rel}) <= TOL


def _two_type_graph(n_a=3, n_b=4, pairs=((0, 0),)):
    nodes = {"A": NodeTypeSchema("A", None, [f"a{i}" for i in range(n_a)]),
             "B": NodeTypeSchema("B", None, [f"b{i}" for i in range(n_b)])}
    key = ("A", "r", "B")
    edges = {key: EdgeTypeSchema(key, "r", np.array(pairs, dtype=np.int64).reshape(-1, 2))}
    return HeteroGraph(nodes, edges), key


def test_negative_sample_forced_outcome():
    all_but_one = [(a, b) for a in range(2) for b in range(2) if (a, b) != (1, 1)]
    g, key = _two_type_graph(2, 2, all_but_one)
    rng = np.random.default_rng(0)
    for _ in range(20):
        cand, flag = negative_sample((1, 0, 0), g, rng)
        if not flag:
            assert (cand[0], cand[2]) == (1, 1)
    cand, flag = negative_sample((0, 0, 1), g, rng)
    assert flag or (cand[0], cand[2]) == (1, 1)


def test_corrupted_tail_keeps_target_type():
    g, key = _two_type_graph(3, 7, [(0, 0), (1, 2)])
    sampler = NegativeSampler(g, [key])
    rng = np.random.default_rng(0)
    for _ in range(500):
        (h, r, t), _, side = sampler.sample(0, 0, 0, rng)
        assert 0 <= h < 3 and 0 <= t < 7
        if side == "tail":
            assert h == 0


def test_head_tail_ratio():
    g, key = _two_type_graph(10, 10, [(0, 0)])
    sampler = NegativeSampler(g, [key])
    rng = np.random.default_rng(0)
    sides = [sampler.sample(0, 0, 0, rng)[2] for _ in range(10_000)]
    assert abs(sides.count("head") / 10_000 - 0.5) <= 0.02


def test_single_member_side_switches():
    g, key = _two_type_graph(1, 5, [(0, 0)])
    sampler = NegativeSampler(g, [key])
    rng = np.random.default_rng(0)
    assert all(sampler.sample(0, 0, 0, rng)[2] == "tail" for _ in range(50))


def test_reverse_edges_excluded_from_training_triples():
    from rdf2rec.graph_builder import convert
    from rdf2rec.rdf_store import TripleStore
    from rdf2rec.synthetic import generate_scholarly
    g = convert(TripleStore.from_triples(generate_scholarly(1).triples))
    keys, triples = kge_triples(g)
    assert all(not g.edge_types[k].is_reverse for k in keys)
    assert len(triples) == sum(len(g.edge_types[k]) for k in g.forward_edge_types())


def test_positive_scores_beat_negatives_on_exact_pattern():
    g, key = _two_type_graph(2, 2, [(0, 0), (1, 1)])
    model, _, _ = train_kge(g, KgeTrainConfig(dim=8, epochs=200, seed=0))
    pos = [score_triple(model, model.entity_id("A", a), 0, model.entity_id("B", b))
           for a, b in [(0, 0), (1, 1)]]
    allp = [score_triple(model, model.entity_id("A", a), 0, model.entity_id("B", b))
            for a in range(2) for b in range(2)]
    assert np.mean(pos) > np.mean(allp)


def test_zero_epochs_returns_initialization():
    g = planted_toy_kg()
    cfg = KgeTrainConfig(epochs=0, seed=5)
    model, tables, losses = train_kge(g, cfg)
    init = init_model(g, g.forward_edge_types(), cfg)
    assert np.array_equal(model.entity, init.entity) and losses == []
    assert np.array_equal(tables["Entity"].values, init.entity)


@pytest.mark.parametrize("variant", VARIANTS)
def test_same_seed_bit_identical(variant):
    g = planted_toy_kg()
    cfg = KgeTrainConfig(model=variant, dim=8, epochs=5, seed=3)
    a, _, la = train_kge(g, cfg)
    b, _, lb = train_kge(g, cfg)
    assert np.array_equal(a.entity, b.entity) and np.array_equal(a.relation, b.relation)
    assert la == lb


def test_complex_tables_are_2d_wide():
    g = planted_toy_kg()
    _, tables, _ = train_kge(g, KgeTrainConfig(model="complex", dim=16, epochs=1))
    assert tables["Entity"].dim == 32


def test_init_bounds():
    g = planted_toy_kg()
    m = init_model(g, g.forward_edge_types(), KgeTrainConfig(model="rotate", dim=16))
    assert np.abs(m.entity).max() <= 6 / 4 and np.abs(m.relation).max() <= math.pi


def test_transe_toy_mrr():
    g = planted_toy_kg()
    mrr = [filtered_mrr(train_kge(g, KgeTrainConfig(seed=s))[0], g) for s in range(5)]
    assert np.mean(mrr) >= 0.9


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts():
    from rdf2rec.kge import KgeTrainingError
    g = planted_toy_kg()
    with pytest.raises(KgeTrainingError, match="lr="):
        train_kge(g, KgeTrainConfig(model="distmult", lr=1e12, epochs=50))


def test_model_persistence(tmp_path):
    g = planted_toy_kg()
    model, _, _ = train_kge(g, KgeTrainConfig(model="rotate", dim=4, epochs=2))
    save_model(model, tmp_path / "kge_model.json")
    back = load_model(tmp_path / "kge_model.json")
    assert back.variant == "rotate" and back.dim == 4
    assert np.array_equal(back.entity, model.entity) and np.array_equal(back.relation, model.relation)
    assert back.relation_keys == model.relation_keys


def test_config_validation():
    with pytest.raises(ValueError):
        KgeTrainConfig(model="hole")
    with pytest.raises(ValueError):
        KgeTrainConfig(dim=0)
