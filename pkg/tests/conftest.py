import json

import numpy as np
import pytest

from hybridsv.dnn import TrainConfig
from hybridsv.pipelines import PipelineConfig

# Small networks and mixtures so pipelines train in about a second each.
SMALL_HIDDEN = {
    "dnn_hmm": (64,),
    "dnn_gmm": (64,),
    "hmm_dnn": (32,),
    "gmm_dnn": (32, 32),
    "solo_dnn": (64,),
}


def small_pipeline(seed=0, **overrides):
    kw = dict(hmm_mix=2, gmm_components=4, em_max_iter=200, hidden_layers=dict(SMALL_HIDDEN),
              train=TrainConfig(epochs=30), enroll_epochs=30, seed=seed)
    kw.update(overrides)
    return PipelineConfig(**kw)


def small_config_doc(root, out, variants, n_repeats=1, seed=0):
    """Experiment config document for a synthetic corpus of 10 speakers."""
    cfg = small_pipeline()
    return {
        "format_version": 1,
        "dataset": {"root": str(root), "schema": "generic_csv", "name": "synthetic"},
        "split": {"protocol": "draw", "n_train_speakers": 6, "n_eval_speakers": 4,
                  "n_train_sentences": 4},
        "variants": list(variants),
        "pipeline": cfg.to_dict(),
        "n_repeats": n_repeats,
        "master_seed": seed,
        "output_dir": str(out),
    }


def write_config(path, doc):
    path.write_text(json.dumps(doc, indent=2))
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    from hybridsv.synth import generate_synthetic_corpus

    root = tmp_path_factory.mktemp("corpus_sep3")
    generate_synthetic_corpus(10, 3.0, seed=1, out_dir=root)
    return root


@pytest.fixture(scope="session")
def speaker_features():
    """Five well-separated synthetic speakers, neutral-only dicts {spk: [FeatureMatrix]}."""
    from hybridsv.features import FeatureMatrix

    gen = np.random.default_rng(7)
    dim = 6
    phones = gen.normal(0, 2, size=(4, dim))

    def utts(offset, n, tag):
        out = []
        for k in range(n):
            rows = [phones[p] + offset + gen.normal(size=(int(gen.integers(5, 9)), dim))
                    for p in (0, 1, 2, 3)]
            out.append(FeatureMatrix(np.concatenate(rows), f"{tag}{k}"))
        return out

    offsets = {f"s{i}": 4.0 * gen.normal(size=dim) for i in range(8)}
    dev = {s: utts(offsets[s], 4, s) for s in ("s0", "s1", "s2", "s3", "s4")}
    enroll = {s: utts(offsets[s], 4, s + "e") for s in ("s5", "s6", "s7")}
    test = {s: utts(offsets[s], 3, s + "t") for s in ("s5", "s6", "s7")}
    return dev, enroll, test
