"""Hybrid and solo speaker-verification pipelines.

Training data is a mapping ``speaker_id -> list of FeatureMatrix`` for the
development speakers; enrollment data has the same shape for the
evaluation speakers. Speaker order everywhere is ``sorted(speaker_ids)``.

Variants
--------
dnn_hmm   per-speaker GMM-HMMs force-align frames; a DNN classifies
          (speaker, state) pairs; scoring converts posteriors to scaled
          likelihoods and Viterbi-decodes the claimed speaker's states.
dnn_gmm   per-speaker GMMs label each frame with its best component; a
          DNN classifies (speaker, component) subclasses.
hmm_dnn   each frame is scored against every speaker's HMM; differences
          to the reference speaker's score feed a speaker-classifier DNN.
gmm_dnn   as hmm_dnn with GMM frame log-likelihoods.
solo_*    a single GMM, HMM or DNN classifier.
"""

import zlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import dnn as _dnn
from . import gmm as _gmm
from . import hmm as _hmm
from .errors import InsufficientDataError, HybridSVError

HYBRID_VARIANTS = ("dnn_hmm", "dnn_gmm", "hmm_dnn", "gmm_dnn")
SOLO_VARIANTS = ("solo_gmm", "solo_hmm", "solo_dnn")
VARIANTS = HYBRID_VARIANTS + SOLO_VARIANTS

DISPLAY_NAMES = {
    "dnn_hmm": "DNN-HMM", "dnn_gmm": "DNN-GMM", "hmm_dnn": "HMM-DNN", "gmm_dnn": "GMM-DNN",
    "solo_gmm": "GMM", "solo_hmm": "HMM", "solo_dnn": "DNN",
}

BANK_KIND = {
    "dnn_hmm": "hmm", "dnn_gmm": "gmm", "hmm_dnn": "hmm", "gmm_dnn": "gmm",
    "solo_gmm": "gmm", "solo_hmm": "hmm", "solo_dnn": None,
}

DEFAULT_HIDDEN = {
    "dnn_hmm": (500, 500),
    "dnn_gmm": (500, 500),
    "hmm_dnn": (64,),
    "gmm_dnn": (128, 128),
    "solo_dnn": (128, 128),
}


class PipelineError(HybridSVError):
    def __init__(self, variant, stage, cause):
        self.variant, self.stage, self.cause = variant, stage, cause
        super().__init__(f"{variant} {stage} failed: {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    n_states: int = 5
    hmm_mix: int = 64
    gmm_components: int = 16
    em_max_iter: int = 1000
    em_tol: float = 1e-6
    hmm_max_iter: int = 20
    hmm_em_iter: int = 20
    hidden_layers: dict = field(default_factory=lambda: dict(DEFAULT_HIDDEN))
    train: _dnn.TrainConfig = field(default_factory=_dnn.TrainConfig)
    enroll_epochs: int = 50
    seed: int = 0

    def hidden(self, variant):
        return tuple(self.hidden_layers.get(variant, DEFAULT_HIDDEN.get(variant, ())))

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["hidden_layers"] = {k: list(v) for k, v in self.hidden_layers.items()}
        d["train"] = {k: getattr(self.train, k) for k in self.train.__dataclass_fields__}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "train" in d:
            d["train"] = _dnn.TrainConfig(**d["train"])
        if "hidden_layers" in d:
            d["hidden_layers"] = {k: tuple(v) for k, v in d["hidden_layers"].items()}
        return cls(**d)


@dataclass(eq=False)
class SpeakerModelBank:
    kind: str
    speaker_ids: tuple
    models: list

    def __post_init__(self):
        self.speaker_ids = tuple(self.speaker_ids)
        if self.kind not in ("gmm", "hmm"):
            raise ValueError(f"unknown bank kind {self.kind!r}")
        if len(self.models) != len(self.speaker_ids) or len(set(self.speaker_ids)) != len(self.speaker_ids):
            raise ValueError("bank needs exactly one model per distinct speaker")

    def __len__(self):
        return len(self.speaker_ids)

    def index(self, speaker_id):
        try:
            return self.speaker_ids.index(speaker_id)
        except ValueError:
            raise ValueError(f"speaker {speaker_id!r} not in bank") from None

    def frame_scores(self, X):
        """(T, n_speakers) per-frame scores of every model."""
        if self.kind == "gmm":
            cols = [_gmm.gmm_log_likelihood(m, X) for m in self.models]
        else:
            cols = [_hmm.frame_scores(m, X) for m in self.models]
        return np.stack(cols, axis=1)


@dataclass(eq=False)
class HybridModel:
    variant: str
    dev_speaker_ids: tuple
    config: PipelineConfig
    feature_recipe: object = None
    dev_bank: SpeakerModelBank = None
    enroll_bank: SpeakerModelBank = None
    enroll_speaker_ids: tuple = None
    dnn: _dnn.DnnModel = None
    state_priors: np.ndarray = None
    input_shift: np.ndarray = None
    input_scale: np.ndarray = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        self.dev_speaker_ids = tuple(self.dev_speaker_ids)
        if self.enroll_speaker_ids is not None:
            self.enroll_speaker_ids = tuple(self.enroll_speaker_ids)

    @property
    def dev_speaker_count(self):
        return len(self.dev_speaker_ids)

    @property
    def enrolled(self):
        return self.enroll_speaker_ids is not None

    @property
    def n_units(self):
        """Classes per speaker in the DNN output layer."""
        if self.variant == "dnn_hmm":
            return self.config.n_states
        if self.variant == "dnn_gmm":
            return self.config.gmm_components
        return 1

    def validate(self):
        kind = BANK_KIND[self.variant]
        needs_dnn = self.variant not in ("solo_gmm", "solo_hmm")
        if (self.dnn is not None) != needs_dnn:
            raise ValueError(f"{self.variant}: DNN presence does not match variant")
        if kind is not None and (self.dev_bank is None or self.dev_bank.kind != kind):
            raise ValueError(f"{self.variant}: needs a {kind} development bank")
        if (self.state_priors is not None) != (self.variant == "dnn_hmm"):
            raise ValueError(f"{self.variant}: state priors present iff dnn_hmm")
        n_speakers = len(self.enroll_speaker_ids) if self.enrolled else self.dev_speaker_count
        if needs_dnn:
            expected_out = n_speakers * self.n_units
            if self.dnn.n_outputs != expected_out:
                raise ValueError(f"{self.variant}: DNN has {self.dnn.n_outputs} outputs, "
                                 f"expected {expected_out}")
        if self.enrolled and kind is not None:
            if self.enroll_bank is None or self.enroll_bank.speaker_ids != self.enroll_speaker_ids:
                raise ValueError(f"{self.variant}: enrollment bank missing or misordered")
        return self


# ---------------------------------------------------------------------------
# Primitive operations


def posterior_to_likelihood(posterior, prior, obs_const=1.0):
    """Scaled likelihood ``posterior * obs_const / prior``."""
    if np.any(np.asarray(prior) <= 0):
        raise ValueError("state prior must be positive")
    if np.any(np.asarray(obs_const) <= 0):
        raise ValueError("observation constant must be positive")
    p = np.asarray(posterior, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("posterior must lie in [0, 1]")
    out = p * obs_const / prior
    return float(out) if out.ndim == 0 else out


def build_score_difference_vector(scores, reference_index, pad_to):
    """``scores[ref] - scores[i]`` for every model i, zero-padded on the right."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if not 0 <= reference_index < scores.size:
        raise ValueError(f"reference index {reference_index} out of range for {scores.size} scores")
    if pad_to < scores.size:
        raise ValueError(f"cannot pad {scores.size} scores to length {pad_to}")
    out = np.zeros(pad_to)
    out[:scores.size] = scores[reference_index] - scores
    out[reference_index] = 0.0
    return out


def _difference_matrix(S, ref, pad_to):
    """Row-wise :func:`build_score_difference_vector` over a (T, n) score matrix."""
    out = np.zeros((S.shape[0], pad_to))
    out[:, :S.shape[1]] = S[:, ref:ref + 1] - S
    out[:, ref] = 0.0
    return out


def _subseed(seed, *keys):
    words = [int(seed) & 0xFFFFFFFF] + [zlib.crc32(str(k).encode()) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def _values(f):
    return np.asarray(getattr(f, "values", f), dtype=np.float64)


def _check_speakers(data, what):
    if not data:
        raise InsufficientDataError(f"no {what} speakers")
    for spk in sorted(data):
        if not data[spk]:
            raise InsufficientDataError(f"{what} speaker {spk!r} has no utterances")
    return tuple(sorted(data))


# ---------------------------------------------------------------------------
# Generative banks


def _fit_bank(kind, data, speakers, cfg, tag):
    models = []
    for spk in speakers:
        utts = [_values(u) for u in data[spk]]
        seed = _subseed(cfg.seed, tag, spk)
        if kind == "gmm":
            models.append(_gmm.gmm_fit(np.concatenate(utts), cfg.gmm_components,
                                       max_iter=cfg.em_max_iter, tol=cfg.em_tol, seed=seed))
        else:
            models.append(_hmm.hmm_fit(utts, n_states=cfg.n_states, n_mix=cfg.hmm_mix,
                                       max_iter=cfg.hmm_max_iter, seed=seed,
                                       em_iter=cfg.hmm_em_iter))
    return SpeakerModelBank(kind, speakers, models)


def _frame_labels(variant, bank, data, speakers, cfg):
    """Stack frames and per-frame class labels for the DNN stage."""
    X, y = [], []
    for j, spk in enumerate(speakers):
        for u in data[spk]:
            F = _values(u)
            if variant == "dnn_hmm":
                labels = j * cfg.n_states + _hmm.force_align(bank.models[j], F)
            elif variant == "dnn_gmm":
                labels = _gmm.gmm_subclass_label(bank.models[j], j, F)
            else:
                labels = np.full(F.shape[0], j)
            X.append(F)
            y.append(labels)
    return np.concatenate(X), np.concatenate(y)


def _difference_data(bank, data, speakers, pad_to):
    X, y = [], []
    for j, spk in enumerate(speakers):
        for u in data[spk]:
            S = bank.frame_scores(_values(u))
            X.append(_difference_matrix(S, j, pad_to))
            y.append(np.full(S.shape[0], j))
    return np.concatenate(X), np.concatenate(y)


def _state_priors(labels, n_classes):
    counts = np.bincount(labels, minlength=n_classes).astype(np.float64) + 1.0
    return counts / counts.sum()


def _normalise(model, X):
    return (X - model.input_shift) / model.input_scale


# ---------------------------------------------------------------------------
# Train / enroll / score


def train_pipeline(variant, dev, cfg=None, feature_recipe=None):
    """Development-stage training on neutral data of the training speakers."""
    cfg = cfg or PipelineConfig()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    speakers = _check_speakers(dev, "development")
    if len(speakers) < 2:
        raise InsufficientDataError("need at least 2 development speakers")
    try:
        return _train(variant, dev, speakers, cfg, feature_recipe).validate()
    except HybridSVError as exc:
        raise PipelineError(variant, "training", exc) from exc


def _train(variant, dev, speakers, cfg, feature_recipe):
    Q = len(speakers)
    model = HybridModel(variant, speakers, cfg, feature_recipe=feature_recipe)
    kind = BANK_KIND[variant]
    if kind is not None:
        model.dev_bank = _fit_bank(kind, dev, speakers, cfg, "dev")
    if variant in ("solo_gmm", "solo_hmm"):
        return model

    if variant in ("hmm_dnn", "gmm_dnn"):
        X, y = _difference_data(model.dev_bank, dev, speakers, Q)
        n_out = Q
        model.input_shift = np.zeros(Q)
        model.input_scale = np.full(Q, max(float(np.sqrt(np.mean(X * X))), 1e-8))
    else:
        X, y = _frame_labels(variant, model.dev_bank, dev, speakers, cfg)
        n_out = Q * model.n_units
        model.input_shift = X.mean(axis=0)
        model.input_scale = np.maximum(X.std(axis=0), 1e-8)
    if variant == "dnn_hmm":
        model.state_priors = _state_priors(y, n_out)

    sizes = [X.shape[1], *cfg.hidden(variant), n_out]
    net = _dnn.dnn_init(sizes, seed=_subseed(cfg.seed, variant, "init"))
    tcfg = replace(cfg.train, seed=_subseed(cfg.seed, variant, "train"))
    model.dnn = _dnn.dnn_train(net, _normalise(model, X), y, tcfg)
    return model


def enroll_pipeline(model, enroll, seed=None):
    """Adapt a development model to the enrollment speakers.

    Returns a new model; the input model (banks and DNN) is not modified.
    DNN variants get a fresh output layer sized for the enrollment speakers,
    trained on enrollment data with the hidden layers frozen.
    """
    speakers = _check_speakers(enroll, "enrollment")
    overlap = set(speakers) & set(model.dev_speaker_ids)
    if overlap:
        raise ValueError(f"enrollment speakers overlap development speakers: {sorted(overlap)}")
    cfg = model.config if seed is None else replace(model.config, seed=seed)
    try:
        return _enroll(model, enroll, speakers, cfg).validate()
    except HybridSVError as exc:
        raise PipelineError(model.variant, "enrollment", exc) from exc


def _enroll(model, enroll, speakers, cfg):
    variant = model.variant
    E = len(speakers)
    out = replace(model, enroll_speaker_ids=speakers)
    kind = BANK_KIND[variant]
    if kind is not None:
        out.enroll_bank = _fit_bank(kind, enroll, speakers, cfg, "enroll")
    if model.dnn is None:
        return out
    if E < 2:
        raise InsufficientDataError("DNN variants need at least 2 enrollment speakers")

    if variant in ("hmm_dnn", "gmm_dnn"):
        Q = model.dev_speaker_count
        if E > Q:
            raise ValueError(f"{E} enrollment speakers exceed the {Q} DNN inputs")
        X, y = _difference_data(out.enroll_bank, enroll, speakers, Q)
    else:
        X, y = _frame_labels(variant, out.enroll_bank, enroll, speakers, cfg)
    n_out = E * model.n_units
    if variant == "dnn_hmm":
        out.state_priors = _state_priors(y, n_out)

    net = _dnn.dnn_replace_output_layer(model.dnn, n_out, seed=_subseed(cfg.seed, variant, "enroll-init"))
    tcfg = replace(cfg.train, epochs=cfg.enroll_epochs, seed=_subseed(cfg.seed, variant, "enroll-train"))
    out.dnn = _dnn.dnn_train(net, _normalise(model, X), y, tcfg, output_only=True)
    return out


def score_claims(model, utterance, claimed):
    """Scores of one utterance against several claimed speakers (higher = genuine)."""
    if not model.enrolled:
        raise ValueError("model has not been enrolled")
    X = _values(utterance)
    idx = []
    for c in claimed:
        try:
            idx.append(model.enroll_speaker_ids.index(c))
        except ValueError:
            raise ValueError(f"claimed speaker {c!r} is not enrolled") from None
    v = model.variant

    if v == "solo_gmm":
        return np.array([_gmm.gmm_log_likelihood(model.enroll_bank.models[e], X).mean() for e in idx])
    if v == "solo_hmm":
        return np.array([_hmm.hmm_score(model.enroll_bank.models[e], X) for e in idx])
    if v in ("hmm_dnn", "gmm_dnn"):
        S = model.enroll_bank.frame_scores(X)
        Q = model.dev_speaker_count
        return np.array([
            _dnn.dnn_log_proba(model.dnn, _normalise(model, _difference_matrix(S, e, Q)))[:, e].mean()
            for e in idx
        ])

    logp = _dnn.dnn_log_proba(model.dnn, _normalise(model, X))
    if v == "solo_dnn":
        return logp[:, idx].mean(axis=0)
    k = model.n_units
    if v == "dnn_gmm":
        return np.array([logsumexp(logp[:, e * k:(e + 1) * k], axis=1).mean() for e in idx])
    # dnn_hmm: scaled log-likelihoods, log p(o) = 0
    log_prior = np.log(model.state_priors)
    scores = []
    for e in idx:
        block = logp[:, e * k:(e + 1) * k] - log_prior[e * k:(e + 1) * k]
        hmm_e = model.enroll_bank.models[e]
        _, ll = _hmm.viterbi_decode(hmm_e.log_transitions, block)
        scores.append(ll / X.shape[0])
    return np.array(scores)


def score_trial(model, utterance, claimed):
    return float(score_claims(model, utterance, [claimed])[0])
