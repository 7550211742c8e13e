"""End-to-end CLI tests over a synthetic corpus in a temp directory."""

import json

import pytest

from morphoanalogy.cli import main
from morphoanalogy.corpus import read_quadruples
from morphoanalogy.evaluator import read_report
from morphoanalogy.trainer import load_checkpoint

from synthlang import suffix_language


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Corpus TSV plus extracted train/test quadruple files."""
    root = tmp_path_factory.mktemp("cli")
    pairs = suffix_language(14, seed=21)
    corpus_path = root / "corpus.tsv"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.source}\t{p.features}\t{p.target}\n")
    rc = main(["extract", "--data", str(corpus_path), "--cap", "40",
               "--seed", "7", "--out", str(root / "train.tsv")])
    assert rc == 0
    rc = main(["extract", "--data", str(corpus_path), "--cap", "12",
               "--seed", "8", "--out", str(root / "test.tsv")])
    assert rc == 0
    return root


@pytest.fixture(scope="module")
def clf_path(workdir):
    out = workdir / "clf.mrph"
    rc = main(["train-clf", "--data", str(workdir / "train.tsv"),
               "--language", "toy", "--epochs", "2", "--char-dim", "16",
               "--batch-size", "64", "--seed", "3", "--out", str(out)])
    assert rc == 0
    return out


class TestExtract:
    def test_outputs_and_manifest(self, workdir):
        quads = read_quadruples(workdir / "train.tsv")
        assert len(quads) == 40
        manifest = json.loads((workdir / "train.tsv.manifest.json").read_text())
        assert manifest["command"] == "extract"
        assert manifest["seed"] == 7
        assert manifest["tool_version"]
        assert list(manifest["inputs"].values())[0].isalnum()

    def test_identical_invocations_are_byte_identical(self, workdir, tmp_path):
        out1, out2 = tmp_path / "a.tsv", tmp_path / "b.tsv"
        argv = ["extract", "--data", str(workdir / "corpus.tsv"), "--cap", "15",
                "--seed", "4"]
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_missing_file_fails(self, tmp_path, capsys):
        rc = main(["extract", "--data", str(tmp_path / "nope.tsv"),
                   "--out", str(tmp_path / "o.tsv")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestTraining:
    def test_train_clf_checkpoint(self, clf_path):
        ckpt = load_checkpoint(clf_path)
        assert ckpt.task == "classification"
        assert ckpt.metadata["language"] == "toy"
        assert ckpt.metadata["config"]["invalid_setting"] == "8-sampled"
        assert (clf_path.parent / "clf.mrph.manifest.json").exists()

    def test_train_clf_deterministic(self, workdir, tmp_path):
        argv = ["train-clf", "--data", str(workdir / "train.tsv"), "--epochs", "1",
                "--char-dim", "16", "--batch-size", "64", "--seed", "9"]
        out1, out2 = tmp_path / "m1.mrph", tmp_path / "m2.mrph"
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_train_reg_uses_clf_embedder(self, workdir, clf_path, tmp_path):
        out = tmp_path / "reg.mrph"
        rc = main(["train-reg", "--data", str(workdir / "train.tsv"),
                   "--init-from", str(clf_path), "--epochs", "2",
                   "--freeze-epochs", "2", "--seed", "3", "--out", str(out)])
        assert rc == 0
        reg = load_checkpoint(out)
        clf = load_checkpoint(clf_path)
        assert reg.task == "regression"
        assert reg.params["embedder.char_matrix"].tobytes() == \
            clf.params["embedder.char_matrix"].tobytes()

    def test_task_contradiction_fails(self, workdir, clf_path, tmp_path, capsys):
        reg_out = tmp_path / "reg2.mrph"
        assert main(["train-reg", "--data", str(workdir / "train.tsv"),
                     "--init-from", str(clf_path), "--epochs", "1",
                     "--seed", "0", "--out", str(reg_out)]) == 0
        rc = main(["train-reg", "--data", str(workdir / "train.tsv"),
                   "--init-from", str(reg_out), "--epochs", "1",
                   "--seed", "0", "--out", str(tmp_path / "x.mrph")])
        assert rc == 1
        assert "classifier" in capsys.readouterr().err


class TestEvaluation:
    def test_eval_clf(self, workdir, clf_path, tmp_path, capsys):
        out = tmp_path / "clf_report.csv"
        rc = main(["eval-clf", "--ckpt", str(clf_path),
                   "--data-test", str(workdir / "test.tsv"), "--out", str(out)])
        assert rc == 0
        assert "valid_accuracy=" in capsys.readouterr().out
        report = read_report(out)
        metrics = {r.metric for r in report.rows}
        assert metrics == {"valid_accuracy", "invalid_accuracy"}

    def test_eval_reg(self, workdir, clf_path, tmp_path, capsys):
        reg_out = tmp_path / "reg.mrph"
        assert main(["train-reg", "--data", str(workdir / "train.tsv"),
                     "--init-from", str(clf_path), "--epochs", "1",
                     "--seed", "1", "--out", str(reg_out)]) == 0
        rc = main(["eval-reg", "--ckpt", str(reg_out),
                   "--data-test", str(workdir / "test.tsv"),
                   "--data", str(workdir / "train.tsv"),
                   "--out", str(tmp_path / "reg_report.csv")])
        assert rc == 0
        assert "accuracy=" in capsys.readouterr().out

    def test_eval_clf_rejects_regression_ckpt(self, workdir, clf_path, tmp_path, capsys):
        reg_out = tmp_path / "reg3.mrph"
        assert main(["train-reg", "--data", str(workdir / "train.tsv"),
                     "--init-from", str(clf_path), "--epochs", "1",
                     "--seed", "2", "--out", str(reg_out)]) == 0
        rc = main(["eval-clf", "--ckpt", str(reg_out),
                   "--data-test", str(workdir / "test.tsv")])
        assert rc == 1
        assert "classification" in capsys.readouterr().err


class TestBaselineCommand:
    def test_feature_baseline(self, workdir, tmp_path, capsys):
        out = tmp_path / "feature.csv"
        rc = main(["baseline", "--solver", "feature",
                   "--data-test", str(workdir / "test.tsv"),
                   "--language", "toy", "--out", str(out)])
        assert rc == 0
        assert "solver=feature" in capsys.readouterr().out
        assert out.exists()

    def test_alea_baseline(self, workdir, capsys):
        rc = main(["baseline", "--solver", "alea", "--rho", "30", "--k", "1",
                   "--data-test", str(workdir / "test.tsv"), "--cap", "4",
                   "--seed", "5"])
        assert rc == 0
        assert "solver=alea" in capsys.readouterr().out

    def test_parallelogram_baseline(self, workdir, clf_path, capsys):
        rc = main(["baseline", "--solver", "parallelogram",
                   "--ckpt", str(clf_path),
                   "--data-test", str(workdir / "test.tsv"),
                   "--data", str(workdir / "train.tsv"), "--cap", "4"])
        assert rc == 0
        assert "solver=parallelogram" in capsys.readouterr().out

    def test_kolmo_reference(self, capsys):
        rc = main(["baseline", "--solver", "kolmo", "--language", "maltese"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "static reference" in out
        assert "68.84" in out

    def test_kolmo_unknown_language(self, capsys):
        assert main(["baseline", "--solver", "kolmo", "--language", "klingon"]) == 1


class TestPerturbAndReport:
    def test_perturb_and_report(self, workdir, clf_path, tmp_path, capsys):
        csv_out = tmp_path / "perturb.csv"
        svg_out = tmp_path / "perturb.svg"
        rc = main(["perturb", "--ckpt", str(clf_path),
                   "--data-test", str(workdir / "test.tsv"),
                   "--probs", "0,0.5", "--repeats", "2", "--seed", "4",
                   "--out", str(csv_out), "--svg", str(svg_out)])
        assert rc == 0
        report = read_report(csv_out)
        assert report.probs == (0.0, 0.5)
        assert report.repeats == 2
        assert svg_out.read_text().count("bar-group") >= 2

        rc = main(["report", "--in", str(csv_out), "--out", str(tmp_path / "again.svg")])
        assert rc == 0
        assert "p_d=0.5" in capsys.readouterr().out

    def test_perturb_deterministic(self, workdir, clf_path, tmp_path):
        argv = ["perturb", "--ckpt", str(clf_path),
                "--data-test", str(workdir / "test.tsv"),
                "--probs", "0.3", "--repeats", "2", "--seed", "6"]
        out1, out2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
        assert main(argv + ["--out", str(out1)]) == 0
        assert main(argv + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
