import json

import pytest

from rdf2rec.cli import main
from rdf2rec.config import RunConfig, dump_config, load_config
from rdf2rec.rdf_store import write_ntriples
from rdf2rec.synthetic import generate_scholarly

FAST = ["--hidden-dim", "8", "--epochs", "3"]


@pytest.fixture(scope="module")
def toy_nt(tmp_path_factory):
    path = tmp_path_factory.mktemp("kg") / "toy.nt"
    kg = generate_scholarly(5, n_authors=8, n_works=14, n_venues=4, n_concepts=8)
    write_ntriples(kg.triples, path)
    return path


@pytest.fixture(scope="module")
def dataset(toy_nt, tmp_path_factory):
    out = tmp_path_factory.mktemp("ds") / "toy"
    assert main(["convert", str(toy_nt), str(out)]) == 0
    assert main(["embed", str(out), "--dim", "8", "--epochs", "3"]) == 0
    return out


def test_convert_outputs(dataset):
    names = {p.name for p in dataset.iterdir()}
    assert len([n for n in names if n.startswith("nodes_")]) >= 2
    assert any(n.startswith("edges_") for n in names)
    assert {"schema.json", "report.json"} <= names
    report = json.loads((dataset / "report.json").read_text())
    assert report["skipped_lines"] == 0 and "run_config" in report


def test_convert_lenient_records_skip(toy_nt, tmp_path):
    bad = tmp_path / "bad.nt"
    bad.write_text(toy_nt.read_text() + "<http://ex.org/a> <http://ex.org/p> .\n")
    assert main(["convert", str(bad), str(tmp_path / "strict")]) == 2
    assert main(["convert", str(bad), str(tmp_path / "ds"), "--strict=false"]) == 0
    assert json.loads((tmp_path / "ds" / "report.json").read_text())["skipped_lines"] == 1


def test_convert_missing_input(tmp_path, capsys):
    assert main(["convert", str(tmp_path / "nope.nt"), str(tmp_path / "ds")]) == 2
    assert "nope.nt" in capsys.readouterr().err


def test_convert_empty_graph(tmp_path):
    empty = tmp_path / "empty.nt"
    empty.write_text("# nothing here\n\n")
    assert main(["convert", str(empty), str(tmp_path / "ds")]) == 3


@pytest.mark.parametrize("model,width", [("transe", 16), ("complex", 32)])
def test_embed_widths(dataset, tmp_path, model, width):
    copy = tmp_path / "ds"
    copy.mkdir()
    for p in dataset.iterdir():
        if not p.name.startswith("embeddings_"):
            (copy / p.name).write_bytes(p.read_bytes())
    assert main(["embed", str(copy), "--model", model, "--dim", "16", "--epochs", "2"]) == 0
    row = (copy / "embeddings_Author.tsv").read_text().splitlines()[-1].split("\t")
    assert len(row) - 1 == width


def test_embed_deterministic(dataset, tmp_path):
    before = (dataset / "embeddings_Work.tsv").read_bytes()
    assert main(["embed", str(dataset), "--dim", "8", "--epochs", "3"]) == 0
    assert (dataset / "embeddings_Work.tsv").read_bytes() == before


def test_embed_malformed_dataset(tmp_path):
    (tmp_path / "schema.json").write_text("{not json")
    assert main(["embed", str(tmp_path)]) == 4
    assert main(["embed", str(tmp_path / "missing")]) == 4


def test_train_and_evaluate(dataset, tmp_path):
    run = tmp_path / "run"
    args = ["train", str(dataset), "--init", "one_hot", "--encoder", "sage", "--setting", "full",
            "--out", str(run), *FAST]
    assert main(args) == 0
    manifest = json.loads((run / "run.json").read_text())
    assert set(manifest["metrics"]) >= {"auc", "f1", "precision", "recall"}
    assert manifest["run_config"]["encoder"]["hidden_dim"] == 8
    assert main(["evaluate", str(run)]) == 0
    again = json.loads((run / "eval.json").read_text())["metrics"]
    assert again["auc"] == pytest.approx(manifest["metrics"]["auc"], abs=1e-12)


def test_evaluate_missing_checkpoint(dataset, tmp_path):
    run = tmp_path / "run"
    assert main(["train", str(dataset), "--out", str(run), *FAST]) == 0
    (run / "checkpoint.npz").unlink()
    assert main(["evaluate", str(run)]) == 5
    assert main(["evaluate", str(tmp_path / "nowhere")]) == 5


def test_tb_without_embeddings(dataset, tmp_path, capsys):
    bare = tmp_path / "bare"
    bare.mkdir()
    for p in dataset.iterdir():
        if not p.name.startswith("embeddings_"):
            (bare / p.name).write_bytes(p.read_bytes())
    assert main(["train", str(bare), "--init", "tb", *FAST]) == 5
    assert "embeddings_" in capsys.readouterr().err


def test_sweep_seed_fanout_and_determinism(dataset, tmp_path):
    outs = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert main(["sweep", str(dataset), "--encoders", "sage", "--strategies", "one_hot,tb",
                     "--seeds", "3", "--out", str(out), *FAST]) == 0
        outs.append((out / "results.csv").read_bytes())
    assert outs[0] == outs[1]
    rows = outs[0].decode().splitlines()[1:]
    assert len(rows) == 6 and {r.split(",")[4] for r in rows} == {"0", "1", "2"}


def test_sweep_unknown_strategy(dataset, tmp_path):
    assert main(["sweep", str(dataset), "--strategies", "magic", "--out", str(tmp_path)]) == 2


def test_config_file_and_override(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nseed = 4\n[encoder]\nhidden_dim = 12\n[train]\nepochs = 7\n")
    cfg = load_config(ini, {"train.epochs": "9"})
    assert (cfg.seed, cfg.encoder.hidden_dim, cfg.train.epochs) == (4, 12, 9)
    assert load_config(ini).train.epochs == 7
    with pytest.raises(KeyError):
        load_config(None, {"train.nonsense": "1"})


def test_config_dump_round_trip(tmp_path):
    cfg = RunConfig()
    cfg.set("kge", "model", "rotate")
    cfg.set("sweep", "seeds", "3")
    path = tmp_path / "c.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path).to_dict() == cfg.to_dict()


def test_seed_environment_default(monkeypatch):
    monkeypatch.setenv("RDF2REC_SEED", "42")
    assert RunConfig().seed == 42
    monkeypatch.delenv("RDF2REC_SEED")
    assert RunConfig().seed == 0


def test_manifest_replays_config(dataset, tmp_path):
    run = tmp_path / "run"
    assert main(["train", str(dataset), "--out", str(run), "--seed", "3", *FAST]) == 0
    cfg = load_config(run / "run.json")
    assert cfg.seed == 3 and cfg.train.epochs == 3


def test_generate_deterministic(tmp_path):
    a, b = tmp_path / "a.nt", tmp_path / "b.nt"
    assert main(["generate", "--profile", "tasks", "--seed", "7", "--out", str(a)]) == 0
    assert main(["generate", "--profile", "tasks", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.communities.json").exists()


def test_generate_unknown_profile(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--profile", "music", "--out", str(tmp_path / "x.nt")])
    assert exc.value.code == 2
