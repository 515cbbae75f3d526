import json

import numpy as np
import pytest
from conftest import small_pipeline

from hybridsv.errors import FormatError
from hybridsv.features import FrameConfig
from hybridsv.modelio import load_model, model_from_dict, model_to_dict, save_model
from hybridsv.pipelines import VARIANTS, enroll_pipeline, score_claims, train_pipeline


@pytest.mark.parametrize("variant", VARIANTS)
def test_roundtrip_preserves_scores(tmp_path, speaker_features, variant):
    dev, enroll, test = speaker_features
    model = enroll_pipeline(train_pipeline(variant, dev, small_pipeline(n_states=3), FrameConfig()), enroll)
    save_model(tmp_path / "m.json", model)
    back = load_model(tmp_path / "m.json")
    assert back.variant == variant
    assert back.feature_recipe == FrameConfig()
    assert back.config == model.config
    u = test["s6"][1]
    ids = list(model.enroll_speaker_ids)
    assert score_claims(back, u, ids).tobytes() == score_claims(model, u, ids).tobytes()
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["format"] == "hybridsv-model" and doc["format_version"] == 1


def test_rejects_foreign_documents(tmp_path, speaker_features):
    dev, _, _ = speaker_features
    doc = model_to_dict(train_pipeline("solo_gmm", dev, small_pipeline()))
    with pytest.raises(FormatError):
        model_from_dict({**doc, "format_version": 99})
    with pytest.raises(FormatError):
        model_from_dict({**doc, "format": "other"})
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_model(tmp_path / "bad.json")


def test_arrays_are_bit_exact(speaker_features):
    dev, _, _ = speaker_features
    m = train_pipeline("solo_dnn", dev, small_pipeline())
    back = model_from_dict(json.loads(json.dumps(model_to_dict(m))))
    for a, b in zip(m.dnn.weights, back.dnn.weights):
        assert a.tobytes() == b.tobytes()
    np.testing.assert_array_equal(m.input_scale, back.input_scale)
