import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from conftest import small_config_doc, write_config

from hybridsv import experiment
from hybridsv.errors import ConfigError
from hybridsv.evaluation import read_metrics_csv, read_roc_csv
from hybridsv.stats import read_significance_csv


@pytest.fixture(scope="module")
def two_repeat_run(synthetic_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg_path = write_config(out / "cfg.json",
                            small_config_doc(synthetic_corpus, out / "results", ["hmm_dnn", "solo_gmm"], 2))
    cfg = experiment.load_config(cfg_path)
    return cfg, experiment.run_experiment(cfg)


def test_outputs_exist_and_reparse(two_repeat_run):
    cfg, result = two_repeat_run
    out = cfg.output_dir
    assert result.ok
    rows = read_metrics_csv(f"{out}/metrics.csv")
    assert {r["variant"] for r in rows} == {"hmm_dnn", "solo_gmm"}
    assert {r["condition"] for r in rows} >= {"neutral", "angry", "average", "pooled"}
    sig = read_significance_csv(f"{out}/significance.csv")
    assert {(r["model_a"], r["model_b"]) for r in sig} == {("hmm_dnn", "solo_gmm")}
    curve = read_roc_csv(f"{out}/roc/hmm_dnn_angry.csv")
    assert curve.far[0] == 0 and curve.far[-1] == 1
    for name in ("timings.csv", "normality.csv", "report.txt", "config.json", "roc_angry.svg",
                 "repeats/r0/trials.csv", "repeats/r0/split.json", "repeats/r1/models/hmm_dnn.json"):
        assert Path(out, name).is_file(), name


def test_average_is_mean_of_repeats(two_repeat_run):
    cfg, result = two_repeat_run
    rows = read_metrics_csv(f"{cfg.output_dir}/metrics.csv")
    reps = [read_metrics_csv(f"{cfg.output_dir}/repeats/r{k}/metrics.csv") for k in range(2)]
    for r in rows:
        vals = [x["eer_percent"] for rep in reps for x in rep
                if (x["variant"], x["condition"]) == (r["variant"], r["condition"])]
        assert r["eer_percent"] == pytest.approx(np.mean(vals), abs=1e-9)


def test_repeats_draw_different_splits(two_repeat_run):
    _, result = two_repeat_run
    a, b = result.repeats
    assert a.seed != b.seed
    assert a.split != b.split
    assert a.n_train == 6 * 4 * 3 and a.n_enroll == 4 * 4 * 3 and a.n_test == 4 * 2 * 3 * 6


def test_trial_protocol():
    from hybridsv.corpus import UtteranceRecord

    recs = [UtteranceRecord("u1", "a", "angry", "s", 1, "x"), UtteranceRecord("u2", "b", "sad", "s", 1, "x")]
    trials = experiment.make_trials(recs, ("a", "b", "c"))
    assert len(trials) == 6
    assert sum(t.is_genuine for t in trials) == 2
    assert {(t.utterance_id, t.claimed_speaker) for t in trials if t.is_genuine} == {("u1", "a"), ("u2", "b")}


def test_minimal_run_one_row_per_condition(synthetic_corpus, tmp_path):
    doc = small_config_doc(synthetic_corpus, tmp_path / "o", ["solo_gmm"], 1)
    cfg = experiment.ExperimentConfig.from_dict(doc)
    experiment.run_experiment(cfg)
    rows = read_metrics_csv(tmp_path / "o" / "metrics.csv")
    conds = [r["condition"] for r in rows]
    assert conds == ["neutral", "angry", "happy", "sad", "fear", "disgust", "average", "pooled"]


def test_failures_are_reported(synthetic_corpus, tmp_path):
    doc = small_config_doc(synthetic_corpus, tmp_path / "o", ["solo_gmm", "solo_dnn"], 1)
    doc["pipeline"]["gmm_components"] = 10_000
    result = experiment.run_experiment(experiment.ExperimentConfig.from_dict(doc))
    assert not result.ok
    assert set(result.failures) == {(0, "solo_gmm")}
    assert json.loads((tmp_path / "o/repeats/r0/failures.json").read_text())["solo_gmm"]


def test_config_validation(tmp_path):
    base = small_config_doc(tmp_path, tmp_path, ["solo_gmm"])
    for bad in ({"n_repeats": 0}, {"variants": []}, {"variants": ["svm"]}, {"format_version": 2},
                {"dataset": {"root": ".", "schema": "mp3"}}):
        with pytest.raises(ConfigError):
            experiment.ExperimentConfig.from_dict({**base, **bad})
    cfg = experiment.ExperimentConfig.from_dict(base)
    experiment.save_config(tmp_path / "c.json", cfg)
    assert experiment.load_config(tmp_path / "c.json").to_dict() == cfg.to_dict()


def test_relative_paths_resolve_against_config(tmp_path):
    doc = small_config_doc("corpus", "out", ["solo_gmm"])
    write_config(tmp_path / "c.json", doc)
    cfg = experiment.load_config(tmp_path / "c.json")
    assert cfg.dataset_root == str(tmp_path / "corpus")
    assert cfg.output_dir == str(tmp_path / "out")


def test_significance_over_trial_errors(two_repeat_run):
    cfg, result = two_repeat_run
    per_trial = replace(cfg, significance={"reference": "hmm_dnn", "samples": "trial_errors"})
    sig, _ = experiment.significance_tests(per_trial, result.repeats)
    assert {r["condition"] for r in sig} == {"neutral", "angry", "happy", "sad", "fear", "disgust"}
    # paired samples: 2 repeats x 12 test utterances x 4 claims per condition
    n_test = result.repeats[0].scores["hmm_dnn"].subset("angry").scores.size
    assert n_test == 4 * 2 * 3 * 4
    assert all(0.0 <= r["p_value"] <= 1.0 for r in sig)
    with pytest.raises(ConfigError):
        experiment.ExperimentConfig.from_dict({**cfg.to_dict(), "significance": {"samples": "frames"}})
