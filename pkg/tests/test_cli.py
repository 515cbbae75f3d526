import subprocess
import sys

import pytest
from conftest import small_config_doc, write_config

from hybridsv.cli import main


@pytest.fixture
def cfg_path(synthetic_corpus, tmp_path):
    return write_config(tmp_path / "cfg.json",
                        small_config_doc(synthetic_corpus, tmp_path / "out", ["gmm_dnn", "solo_gmm"], 2))


def test_stepwise_commands(cfg_path, tmp_path, capsys):
    out = tmp_path / "steps"
    args = ["--config", str(cfg_path), "--out", str(out), "--variants", "gmm_dnn,solo_hmm"]
    assert main(["train", *args]) == 0
    assert (out / "models" / "gmm_dnn.json").is_file()
    assert main(["enroll", *args]) == 0
    assert main(["evaluate", *args]) == 0
    assert (out / "metrics.csv").is_file() and (out / "roc_angry.svg").is_file()
    assert "GMM-DNN" in capsys.readouterr().out


def test_run_compare_plot(cfg_path, tmp_path, capsys):
    out = tmp_path / "full"
    assert main(["run", "--config", str(cfg_path), "--out", str(out), "--repeats", "2", "--seed", "3"]) == 0
    assert "Condition" in capsys.readouterr().out
    assert main(["compare", "--results", str(out), "--out", str(tmp_path / "cmp"),
                 "--reference", "gmm_dnn"]) == 0
    assert (tmp_path / "cmp" / "significance.csv").read_text().count("\n") == 1 + 6
    assert main(["plot", "--results", str(out), "--out", str(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "roc_pooled.svg").is_file()


def test_synth_and_extract(tmp_path):
    corpus_dir = tmp_path / "wavs"
    assert main(["synth", "--out", str(corpus_dir), "--speakers", "2", "--sentences", "1",
                 "--repetitions", "1", "--render", "wav"]) == 0
    doc = small_config_doc(corpus_dir, tmp_path / "out", ["solo_gmm"])
    doc["features"] = {"n_cepstra": 12}
    cfg = write_config(tmp_path / "c.json", doc)
    assert main(["extract", "--config", str(cfg)]) == 0
    feats = list((tmp_path / "out" / "features").glob("*.feat"))
    assert len(feats) == 12


@pytest.mark.parametrize("argv", [
    ["run"],
    ["run", "--config", "/nonexistent.json"],
    ["run", "--config", "x.json", "--variants", "svm"],
    ["synth", "--out", "x", "--speakers", "1"],
    ["evaluate", "--config", "MISSING_MODELS"],
    ["plot", "--results", "/nonexistent"],
    ["bogus"],
])
def test_validation_errors_exit_1(argv, cfg_path, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    argv = [str(cfg_path) if a == "MISSING_MODELS" else a for a in argv]
    assert main(argv) == 1


def test_runtime_failure_exit_2(synthetic_corpus, tmp_path):
    doc = small_config_doc(synthetic_corpus, tmp_path / "out", ["solo_gmm"])
    doc["pipeline"]["gmm_components"] = 10_000
    assert main(["run", "--config", str(write_config(tmp_path / "c.json", doc))]) == 2


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "hybridsv", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("extract", "train", "enroll", "evaluate", "compare", "plot", "synth", "run"):
        assert cmd in r.stdout
