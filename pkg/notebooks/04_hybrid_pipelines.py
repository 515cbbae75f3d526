"""The four hybrid pipelines and the solo baselines on toy speakers.

Each speaker is a fixed offset added to a shared phone inventory. Models
are trained on development speakers, enrolled on new speakers, and then
score genuine and impostor claims.
"""

# %%
import numpy as np

from hybridsv.dnn import TrainConfig
from hybridsv.evaluation import ScoreSet, compute_auc, compute_eer, roc_points
from hybridsv.features import FeatureMatrix
from hybridsv.pipelines import VARIANTS, PipelineConfig, enroll_pipeline, score_claims, train_pipeline

rng = np.random.default_rng(7)
dim = 6
phones = rng.normal(0, 2, size=(4, dim))
offsets = {f"s{i}": 3.0 * rng.normal(size=dim) for i in range(8)}


def utterances(spk, n):
    return [FeatureMatrix(np.concatenate([phones[p] + offsets[spk] + rng.normal(size=(8, dim))
                                          for p in range(4)]), f"{spk}-{k}") for k in range(n)]


dev = {s: utterances(s, 4) for s in ("s0", "s1", "s2", "s3", "s4")}
enroll = {s: utterances(s, 4) for s in ("s5", "s6", "s7")}
test = {s: utterances(s, 3) for s in ("s5", "s6", "s7")}

cfg = PipelineConfig(n_states=3, hmm_mix=2, gmm_components=4,
                     hidden_layers={v: (32,) for v in VARIANTS}, train=TrainConfig(epochs=30),
                     enroll_epochs=30)

# %% [markdown]
# Network shapes follow from the dev set: DNN-HMM predicts one class per
# (speaker, state), DNN-GMM one per (speaker, component), and the two
# score-fusion networks read one score difference per dev model.

# %%
for v in VARIANTS:
    model = enroll_pipeline(train_pipeline(v, dev, cfg), enroll)
    scores, genuine = [], []
    for spk, utts in test.items():
        for u in utts:
            s = score_claims(model, u, model.enroll_speaker_ids)
            scores += list(s)
            genuine += [c == spk for c in model.enroll_speaker_ids]
    ss = ScoreSet(scores, genuine)
    shape = "" if model.dnn is None else f"net {model.dnn.n_inputs}->{model.dnn.n_outputs}"
    print(f"{v:<9} EER {compute_eer(roc_points(ss)):6.2f}%  AUC {compute_auc(ss):.3f}  {shape}")
