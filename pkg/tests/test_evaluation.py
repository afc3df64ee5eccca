import numpy as np
import pytest

from rdf2rec.evaluation import (CSV_HEADER, ScenarioError, ScenarioSpec, SweepConfig, aggregate,
                                extract_scenario, mean_metric, run_sweep)
from rdf2rec.features import STRATEGIES
from rdf2rec.gnn import EncoderConfig
from rdf2rec.graph_builder import convert
from rdf2rec.link_prediction import TrainConfig
from rdf2rec.rdf_store import RDF_TYPE, parse_ntriples

EX = "http://ex.org/"
SIX_TYPES = ("Author", "Work", "Venue", "Concept", "Institution", "Funder")


def six_type_graph():
    rows = []
    for i in range(4):
        for cls in SIX_TYPES:
            rows.append(f"<{EX}{cls}{i}> <{RDF_TYPE}> <{EX}{cls}> .")
        rows += [f"<{EX}Author{i}> <{EX}writes> <{EX}Work{i}> .",
                 f"<{EX}Author{i}> <{EX}writes> <{EX}Work{(i + 1) % 4}> .",
                 f"<{EX}Work{i}> <{EX}in> <{EX}Venue{i}> .",
                 f"<{EX}Work{i}> <{EX}about> <{EX}Concept{i}> .",
                 f"<{EX}Author{i}> <{EX}at> <{EX}Institution{i}> .",
                 f"<{EX}Work{i}> <{EX}fundedBy> <{EX}Funder{i}> ."]
    return convert(parse_ntriples("\n".join(rows) + "\n"))


FAST = SweepConfig(encoder=EncoderConfig(hidden_dim=8),
                   train=TrainConfig(epochs=3, patience=3))
TARGET = ("Work", "hasAuthor", "Author")


def test_full_mode_identity(tiny_graph):
    assert extract_scenario(tiny_graph, ScenarioSpec("s", "full", TARGET)) is tiny_graph


def test_bipartite_on_six_types():
    g = six_type_graph()
    assert len(g.node_types) == 6
    sub = extract_scenario(g, ScenarioSpec("s", "bipartite", ("Author", "writes", "Work")))
    assert list(sub.node_types) == ["Author", "Work"]
    assert set(sub.edge_types) == {("Author", "writes", "Work"), ("Work", "writes_rev", "Author")}
    # indices and feature tables carried over unchanged
    for t in sub.node_types:
        assert sub.node_types[t].members == g.node_types[t].members
        assert sub.content_features.get(t) is g.content_features.get(t)


def test_homogeneous_edge_count(tiny_graph):
    key = ("Author", "coAuthor", "Author")
    sub = extract_scenario(tiny_graph, ScenarioSpec("s", "homogeneous", key))
    assert list(sub.node_types) == ["Author"]
    assert len(sub.edge_types[key]) == len(tiny_graph.edge_types[key])
    assert all(k[0] == k[2] == "Author" for k in sub.edge_types)


def test_scenario_errors(tiny_graph):
    with pytest.raises(ScenarioError):
        ScenarioSpec("s", "tripartite", TARGET)
    with pytest.raises(ScenarioError):
        ScenarioSpec("s", "homogeneous", TARGET).retained(tiny_graph)
    with pytest.raises(ScenarioError):
        ScenarioSpec("s", "full", ("Work", "nope", "Author")).retained(tiny_graph)


def test_hgt_on_homogeneous_is_na(tiny_graph):
    spec = ScenarioSpec("collab", "homogeneous", ("Author", "coAuthor", "Author"))
    rows = run_sweep(tiny_graph, [spec], ["hgt"], ["one_hot"], FAST)
    assert len(rows) == 1 and rows[0].report is None and "HGT" in rows[0].reason
    assert rows[0].csv().endswith("n/a,n/a,n/a,n/a")


@pytest.mark.slow
def test_sweep_cardinality_and_outputs(tiny_graph, tmp_path):
    specs = [ScenarioSpec("paper", "full", TARGET),
             ScenarioSpec("paper", "bipartite", TARGET)]
    rows = run_sweep(tiny_graph, specs, config=FAST, out_dir=tmp_path)
    assert len(rows) == 2 * 3 * len(STRATEGIES) == 60
    na = [r for r in rows if r.report is None]
    assert all(r.reason for r in na)
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 61
    md = (tmp_path / "results.md").read_text()
    assert "### paper (full)" in md and "### paper (bipartite)" in md
    assert (tmp_path / "runs").is_dir()
    for r in rows:
        if r.report is not None:
            assert 0.0 <= r.report.auc <= 1.0


def test_sweep_csv_bytes_deterministic(tiny_graph, tmp_path):
    spec = [ScenarioSpec("paper", "full", TARGET)]
    cfg = SweepConfig(encoder=FAST.encoder, train=FAST.train, seeds=2, master_seed=11)
    for d in ("a", "b"):
        run_sweep(tiny_graph, spec, ["sage", "gat"], ["one_hot", "tb"], cfg, tmp_path / d)
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    seeds = {line.split(",")[4] for line in a.decode().splitlines()[1:]}
    assert seeds == {"11", "12"}


def test_aggregate_and_mean_metric(tiny_graph):
    cfg = SweepConfig(encoder=FAST.encoder, train=FAST.train, seeds=3)
    rows = run_sweep(tiny_graph, [ScenarioSpec("paper", "full", TARGET)], ["sage"], ["one_hot"], cfg)
    stats = aggregate(rows)[("paper", "full", "sage", "one_hot")]
    aucs = [r.report.auc for r in rows]
    assert stats["n"] == 3
    assert stats["auc"] == pytest.approx((np.mean(aucs), np.std(aucs)))
    assert mean_metric(rows, encoder="sage") == pytest.approx(np.mean(aucs))
    assert np.isnan(mean_metric(rows, encoder="gat"))


def test_unknown_encoder(tiny_graph):
    with pytest.raises(ValueError):
        run_sweep(tiny_graph, [ScenarioSpec("p", "full", TARGET)], ["gcn"], ["one_hot"], FAST)
