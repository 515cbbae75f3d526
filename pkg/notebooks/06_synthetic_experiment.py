"""A full experiment on a generated corpus, run through the same code as the CLI.

Equivalent shell commands:

    hybridsv synth --out corpus --speakers 10 --separation 3
    hybridsv run --config experiment.json
"""

# %%
import json
import tempfile
from pathlib import Path

from hybridsv import experiment
from hybridsv.dnn import TrainConfig
from hybridsv.pipelines import PipelineConfig
from hybridsv.synth import generate_synthetic_corpus

work = Path(tempfile.mkdtemp(prefix="hybridsv-"))
generate_synthetic_corpus(10, 3.0, seed=1, out_dir=work / "corpus")

# %% [markdown]
# Configs are JSON. Relative paths resolve against the config file. The
# pipeline block here shrinks the models so the example finishes quickly.

# %%
pipe = PipelineConfig(hmm_mix=2, gmm_components=4, em_max_iter=200,
                      hidden_layers={v: (32,) for v in ("dnn_hmm", "dnn_gmm", "hmm_dnn", "gmm_dnn", "solo_dnn")},
                      train=TrainConfig(epochs=20), enroll_epochs=20)
doc = {
    "format_version": 1,
    "dataset": {"root": "corpus", "schema": "generic_csv", "name": "synthetic"},
    "split": {"protocol": "draw", "n_train_speakers": 6, "n_eval_speakers": 4, "n_train_sentences": 4},
    "variants": ["hmm_dnn", "gmm_dnn", "solo_gmm"],
    "pipeline": pipe.to_dict(),
    "n_repeats": 2,
    "master_seed": 0,
    "output_dir": "results",
}
(work / "experiment.json").write_text(json.dumps(doc, indent=2))

# %%
result = experiment.run_experiment(experiment.load_config(work / "experiment.json"))
print((work / "results" / "report.txt").read_text())
print((work / "results" / "significance.csv").read_text())
print("outputs in", work / "results")
