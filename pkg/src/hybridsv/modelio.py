"""JSON model files.

Layout (``format_version`` 1)::

    {
      "format": "hybridsv-model",
      "format_version": 1,
      "variant": "hmm_dnn",
      "dev_speaker_ids": [...],            # fixes DNN/bank column order
      "enroll_speaker_ids": [...] | null,
      "config": {...},                     # PipelineConfig fields
      "feature_recipe": {...} | null,      # FrameConfig fields
      "dev_bank": BANK | null,
      "enroll_bank": BANK | null,
      "dnn": {"weights": [ARRAY...], "biases": [ARRAY...]} | null,
      "state_priors": ARRAY | null,
      "input_shift": ARRAY | null,
      "input_scale": ARRAY | null
    }

    BANK  = {"kind": "gmm"|"hmm", "speaker_ids": [...], "models": [GMM|HMM...]}
    GMM   = {"weights": ARRAY, "means": ARRAY, "variances": ARRAY}
    HMM   = {"transitions": ARRAY, "emissions": [GMM...]}
    ARRAY = {"dtype": "<f8", "shape": [...], "data": base64 of the raw bytes}

Arrays are stored as base64 little-endian float64 so values round-trip
bit-exactly.
"""

import base64
import json
from pathlib import Path

import numpy as np

from .dnn import DnnModel
from .errors import FormatError
from .features import FrameConfig
from .gmm import GmmModel
from .hmm import HmmModel
from .pipelines import HybridModel, PipelineConfig, SpeakerModelBank

FORMAT = "hybridsv-model"
FORMAT_VERSION = 1


def encode_array(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape),
            "data": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(d):
    if d is None:
        return None
    if d.get("dtype") != "<f8":
        raise FormatError(f"unsupported array dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def _gmm_doc(g):
    return {"weights": encode_array(g.weights), "means": encode_array(g.means),
            "variances": encode_array(g.variances)}


def _gmm_from(d):
    return GmmModel(decode_array(d["weights"]), decode_array(d["means"]), decode_array(d["variances"]))


def _bank_doc(bank):
    if bank is None:
        return None
    if bank.kind == "gmm":
        models = [_gmm_doc(m) for m in bank.models]
    else:
        models = [{"transitions": encode_array(m.transitions),
                   "emissions": [_gmm_doc(g) for g in m.emissions]} for m in bank.models]
    return {"kind": bank.kind, "speaker_ids": list(bank.speaker_ids), "models": models}


def _bank_from(d):
    if d is None:
        return None
    if d["kind"] == "gmm":
        models = [_gmm_from(m) for m in d["models"]]
    else:
        models = [HmmModel(decode_array(m["transitions"]), [_gmm_from(g) for g in m["emissions"]])
                  for m in d["models"]]
    return SpeakerModelBank(d["kind"], d["speaker_ids"], models)


def model_to_dict(model):
    recipe = model.feature_recipe
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "variant": model.variant,
        "dev_speaker_ids": list(model.dev_speaker_ids),
        "enroll_speaker_ids": None if model.enroll_speaker_ids is None else list(model.enroll_speaker_ids),
        "config": model.config.to_dict(),
        "feature_recipe": recipe.to_dict() if recipe is not None else None,
        "dev_bank": _bank_doc(model.dev_bank),
        "enroll_bank": _bank_doc(model.enroll_bank),
        "dnn": None if model.dnn is None else {
            "weights": [encode_array(w) for w in model.dnn.weights],
            "biases": [encode_array(b) for b in model.dnn.biases],
        },
        "state_priors": None if model.state_priors is None else encode_array(model.state_priors),
        "input_shift": None if model.input_shift is None else encode_array(model.input_shift),
        "input_scale": None if model.input_scale is None else encode_array(model.input_scale),
    }


def model_from_dict(doc):
    if doc.get("format") != FORMAT:
        raise FormatError("not a hybridsv model document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {doc.get('format_version')}")
    net = doc["dnn"]
    recipe = doc["feature_recipe"]
    return HybridModel(
        variant=doc["variant"],
        dev_speaker_ids=doc["dev_speaker_ids"],
        config=PipelineConfig.from_dict(doc["config"]),
        feature_recipe=FrameConfig.from_dict(recipe) if recipe is not None else None,
        dev_bank=_bank_from(doc["dev_bank"]),
        enroll_bank=_bank_from(doc["enroll_bank"]),
        enroll_speaker_ids=doc["enroll_speaker_ids"],
        dnn=None if net is None else DnnModel([decode_array(w) for w in net["weights"]],
                                              [decode_array(b) for b in net["biases"]]),
        state_priors=decode_array(doc["state_priors"]),
        input_shift=decode_array(doc["input_shift"]),
        input_scale=decode_array(doc["input_scale"]),
    ).validate()


def save_model(path, model):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return model_from_dict(doc)
