"""Hybrid GMM/HMM/DNN speaker verification toolkit."""

from .corpus import (
    AudioSignal,
    DatasetManifest,
    SplitSpec,
    UtteranceRecord,
    build_manifest,
    make_splits,
    read_wav,
    resample,
    write_wav,
)
from .dnn import DnnModel, TrainConfig, dnn_forward, dnn_init, dnn_replace_output_layer, dnn_train
from .evaluation import (
    RocCurve,
    ScoreSet,
    Trial,
    compute_auc,
    compute_eer,
    measure_time,
    percentage_decrease,
    roc_points,
)
from .features import FeatureMatrix, FrameConfig, append_deltas, hz_to_mel, mfcc
from .gmm import GmmModel, gmm_fit, gmm_log_likelihood, gmm_subclass_label
from .hmm import HmmModel, force_align, hmm_fit, hmm_score, viterbi
from .pipelines import (
    VARIANTS,
    HybridModel,
    PipelineConfig,
    SpeakerModelBank,
    build_score_difference_vector,
    enroll_pipeline,
    posterior_to_likelihood,
    score_trial,
    train_pipeline,
)
from .stats import ks_normality, wilcoxon_signed_rank

__version__ = "0.1.0"
