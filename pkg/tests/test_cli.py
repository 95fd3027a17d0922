import json

import pytest

from gdpref.cli import main
from gdpref.labels import LabelStore
from gdpref.layouts import ALGORITHMS

from conftest import make_store


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("0 1\n0 3\n1 2\n2 3\n")
    return path


@pytest.fixture
def manifest(tmp_path):
    for i in range(3):
        (tmp_path / f"m{i}.txt").write_text("0 1\n0 3\n1 2\n2 3\n0 2\n")
    path = tmp_path / "manifest.jsonl"
    path.write_text(
        "".join(
            json.dumps({"id": f"m{i}", "path": f"m{i}.txt", "split": "train" if i < 2 else "test"})
            + "\n"
            for i in range(3)
        )
    )
    return path


@pytest.fixture
def store_file(tmp_path):
    store = make_store(
        {
            "a": {"m0": "neato", "m1": "kamada_kawai", "m2": "neato"},
            "b": {"m0": "neato", "m1": "fa2", "m2": "spring"},
        }
    )
    path = tmp_path / "labels.jsonl"
    store.write(path)
    return path


class TestLayoutCmd:
    def test_single_algorithm(self, graph_file, tmp_path, capsys):
        rc = main(["layout", str(graph_file), "--algorithm", "neato", "--out-dir", str(tmp_path / "o")])
        assert rc == 0
        assert (tmp_path / "o" / "g.neato.layout").exists()

    def test_all_with_render(self, graph_file, tmp_path):
        rc = main(["layout", str(graph_file), "--out-dir", str(tmp_path / "o"), "--render", "--size", "32"])
        assert rc == 0
        for alg in ALGORITHMS:
            assert (tmp_path / "o" / f"g.{alg}.layout").exists()
            assert (tmp_path / "o" / f"g.{alg}.pgm").exists()

    def test_unknown_flag_usage_error(self, graph_file):
        with pytest.raises(SystemExit) as exc:
            main(["layout", str(graph_file), "--bogus"])
        assert exc.value.code != 0


class TestEmbedCmd:
    def test_spectral(self, graph_file, tmp_path):
        out = tmp_path / "e.txt"
        assert main(["embed", str(graph_file), "--method", "spectral", "--k", "2", "--out", str(out)]) == 0
        assert out.read_text().startswith("g spectral 4 2")


class TestLabelsCmd:
    def test_ingest_and_stats(self, store_file, tmp_path, capsys):
        out = tmp_path / "clean.jsonl"
        assert main(["labels", "ingest", "--store", str(out), "--input", str(store_file)]) == 0
        assert main(["labels", "stats", "--store", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "labels: 6" in captured
        assert "mean labels per graph: 2.00" in captured

    def test_consensus_and_distribution(self, store_file, capsys):
        assert main(["labels", "consensus", "--store", str(store_file)]) == 0
        assert main(["labels", "distribution", "--store", str(store_file)]) == 0
        captured = capsys.readouterr().out
        assert "neato\t3\t50.00" in captured


class TestAlignCmd:
    def test_micro_macro(self, store_file, capsys):
        assert main(["align", "--store", str(store_file)]) == 0
        out = capsys.readouterr().out
        assert "micro\t0.3333" in out

    def test_pairwise(self, store_file, capsys):
        assert main(["align", "--store", str(store_file), "--pairwise", "a", "b"]) == 0
        assert "1/3" in capsys.readouterr().out

    def test_alpha_sweep_starts_at_one(self, store_file, manifest, capsys):
        assert main([
            "align", "--store", str(store_file), "--alpha-sweep", "--manifest", str(manifest),
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "0.00\t1.0000"  # alpha = 0 -> 100%

    def test_t_test(self, tmp_path, store_file, capsys):
        (tmp_path / "a.txt").write_text("2 4 6\n")
        (tmp_path / "b.txt").write_text("1 2 3\n")
        assert main(["align", "--store", str(store_file), "--t-test",
                     str(tmp_path / "a.txt"), str(tmp_path / "b.txt")]) == 0
        assert "t=3.4641" in capsys.readouterr().out

    def test_report_dir_renders_figures(self, store_file, tmp_path, capsys):
        out = tmp_path / "report"
        assert main(["align", "--store", str(store_file), "--report-dir", str(out)]) == 0
        assert (out / "report.txt").exists()
        assert (out / "pairwise.tsv").exists()
        assert (out / "heatmap.pgm").exists()
        assert (out / "heatmap.png").exists()

    def test_confidence_curve(self, store_file, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        preds.write_text(
            json.dumps({"graph_id": "m0", "choice": "neato", "confidence": 0.9}) + "\n"
            + json.dumps({"graph_id": "m1", "choice": "fa2", "confidence": 0.3}) + "\n"
        )
        assert main(["align", "--store", str(store_file), "--confidence-curve", str(preds),
                     "--thresholds", "0.0", "0.5"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("0.00\t1.0000")
        assert lines[1].startswith("0.50\t0.5000")


class TestTrainPredictCmd:
    def test_train_logs_augmented_count(self, manifest, store_file, tmp_path, capsys):
        model = tmp_path / "m.npz"
        rc = main([
            "train", "--manifest", str(manifest), "--store", str(store_file),
            "--epochs", "2", "--augment", "10", "--out", str(model),
            "--config", str(tmp_path / "cfg.json"),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "training samples: 20 (2 graphs x augment 10)" in out
        assert model.exists()
        config = json.loads((tmp_path / "cfg.json").read_text())
        assert config["augment_k"] == 10

    def test_predict_writes_jsonl(self, manifest, store_file, tmp_path, capsys):
        model = tmp_path / "m.npz"
        main(["train", "--manifest", str(manifest), "--store", str(store_file),
              "--epochs", "1", "--out", str(model)])
        preds = tmp_path / "p.jsonl"
        rc = main(["predict", "--manifest", str(manifest), "--model", str(model),
                   "--out", str(preds)])
        assert rc == 0
        lines = [json.loads(l) for l in preds.read_text().splitlines()]
        assert [l["graph_id"] for l in lines] == ["m0", "m1", "m2"]
        assert all(l["choice"] in ALGORITHMS for l in lines)


class TestLLMLabelCmd:
    def test_mock_run(self, manifest, tmp_path, capsys):
        script = {f"m{i}": {"text": f"Result: layout {i + 1}",
                            "token_logprobs": [{"token": str(i + 1), "logprob": -0.1}]}
                  for i in range(3)}
        (tmp_path / "mock.json").write_text(json.dumps(script))
        out = tmp_path / "llm.jsonl"
        rc = main(["llm-label", "--manifest", str(manifest), "--strategy", "structural",
                   "--mock", str(tmp_path / "mock.json"), "--out", str(out)])
        assert rc == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 3
        assert lines[0]["position"] == 1
        assert "labeled: 3 unparseable: 0" in capsys.readouterr().out


class TestServeCmd:
    def test_missing_secret(self, manifest, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("GDPREF_SECRET", raising=False)
        rc = main(["serve", "--manifest", str(manifest), "--store", str(tmp_path / "s.jsonl")])
        assert rc == 2
        assert "GDPREF_SECRET" in capsys.readouterr().err
