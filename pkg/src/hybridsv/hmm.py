"""Left-to-right GMM-HMMs: Viterbi decoding, forced alignment, segmental training.

Topology: state i may stay in i or advance to i + 1; the last state only
self-loops. Decoding always starts in state 0 and may end in any state.
"""

from dataclasses import dataclass, field

import numpy as np

from . import gmm as _gmm
from .errors import InsufficientDataError, TooShortError


@dataclass(eq=False)
class HmmModel:
    transitions: np.ndarray
    emissions: list
    # total aligned log-likelihood per training iteration; not persisted
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        A = np.asarray(self.transitions, dtype=np.float64)
        S = len(self.emissions)
        if A.shape != (S, S) or S < 1:
            raise ValueError(f"transition matrix {A.shape} does not match {S} states")
        if not np.allclose(A.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError("transition rows must sum to 1")
        if np.any(A[~left_to_right_mask(S)] != 0) or np.any(A < 0):
            raise ValueError("transitions must be left-to-right")
        dims = {g.dim for g in self.emissions}
        if len(dims) != 1:
            raise ValueError("emission dimensions differ")
        self.transitions = A

    @property
    def n_states(self):
        return len(self.emissions)

    @property
    def dim(self):
        return self.emissions[0].dim

    @property
    def log_transitions(self):
        with np.errstate(divide="ignore"):
            return np.log(self.transitions)

    def emission_log_likelihoods(self, obs):
        """(T, n_states) matrix of per-state GMM log-likelihoods."""
        X = _values(obs)
        if X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: model dim {self.dim}, input dim {X.shape[1]}")
        return np.stack([_gmm.gmm_log_likelihood(g, X) for g in self.emissions], axis=1)


def left_to_right_mask(n_states):
    mask = np.eye(n_states, dtype=bool)
    mask[np.arange(n_states - 1), np.arange(1, n_states)] = True
    return mask


def _values(obs):
    X = getattr(obs, "values", obs)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"observations must be a non-empty (T, dim) matrix, got {X.shape}")
    return X


def viterbi_decode(log_trans, log_emit):
    """Best path through a trellis starting in state 0.

    ``log_trans`` is (S, S); ``log_emit`` is (T, S). Returns (path, score)
    where score is the joint log-probability of path and observations.
    """
    T, S = log_emit.shape
    back = np.zeros((T, S), dtype=np.int64)
    delta = np.full(S, -np.inf)
    delta[0] = log_emit[0, 0]
    for t in range(1, T):
        cand = delta[:, None] + log_trans
        # argmax picks the lowest predecessor on ties
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(S)] + log_emit[t]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    score = float(delta[path[-1]])
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, score


def viterbi(model, obs):
    """Most likely left-to-right state path and its joint log-likelihood."""
    return viterbi_decode(model.log_transitions, model.emission_log_likelihoods(obs))


def force_align(model, obs):
    """Frame-level state labels from the Viterbi path."""
    path, _ = viterbi(model, obs)
    return path


def hmm_score(model, obs):
    """Viterbi log-likelihood divided by the number of frames."""
    X = _values(obs)
    _, score = viterbi(model, X)
    return score / X.shape[0]


def frame_scores(model, obs):
    """Per-frame proxy score: max over states of emission + self-loop log-prob."""
    loops = np.diag(model.log_transitions)
    return np.max(model.emission_log_likelihoods(obs) + loops, axis=1)


def uniform_segmentation(n_frames, n_states):
    """State labels splitting ``n_frames`` into ``n_states`` contiguous blocks."""
    return (np.arange(n_frames) * n_states) // n_frames


def _transition_counts(paths, S):
    counts = np.zeros((S, S))
    for p in paths:
        np.add.at(counts, (p[:-1], p[1:]), 1)
    return counts


def _smoothed_transitions(counts):
    S = counts.shape[0]
    mask = left_to_right_mask(S)
    A = np.where(mask, counts + 1.0, 0.0)
    return A / A.sum(axis=1, keepdims=True)


def _transition_score(A, counts):
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.sum(np.where(counts > 0, counts * np.log(A), 0.0)))


def _fit_state(frames, n_mix, max_iter, seed, init=None):
    if init is not None:
        return _gmm.gmm_fit(frames, init.n_components, max_iter=max_iter, init=init)
    k = min(n_mix, np.unique(frames, axis=0).shape[0])
    return _gmm.gmm_fit(frames, k, max_iter=max_iter, seed=seed)


def hmm_fit(utterances, n_states=5, n_mix=64, max_iter=20, seed=0, em_iter=20):
    """Segmental (Viterbi) training of a left-to-right GMM-HMM.

    Frames are first split uniformly across states. Each iteration then
    re-estimates every state's GMM by EM warm-started from its current
    parameters, re-estimates transitions from aligned counts with add-one
    smoothing, and re-aligns all utterances. Training stops when no frame
    changes state or after ``max_iter`` iterations.

    A state's GMM starts with ``min(n_mix, distinct frames)`` components.
    """
    data = [_values(u) for u in utterances]
    if not data:
        raise InsufficientDataError("no training utterances")
    for i, X in enumerate(data):
        if X.shape[0] < n_states:
            raise TooShortError(f"utterance {i} has {X.shape[0]} frames, fewer than {n_states} states")
    S = n_states
    rng = np.random.default_rng(seed)

    paths = [uniform_segmentation(X.shape[0], S) for X in data]
    frames = np.concatenate(data)
    labels = np.concatenate(paths)
    emissions = [_fit_state(frames[labels == s], n_mix, em_iter, int(rng.integers(2**31)))
                 for s in range(S)]
    counts = _transition_counts(paths, S)
    A = _smoothed_transitions(counts)
    model = HmmModel(A, emissions)

    history = []
    for _ in range(max_iter):
        new_paths = []
        total = 0.0
        for X in data:
            p, score = viterbi(model, X)
            new_paths.append(p)
            total += score
        history.append(total)
        changed = any(not np.array_equal(a, b) for a, b in zip(paths, new_paths))
        paths = new_paths
        if not changed and len(history) > 1:
            break

        labels = np.concatenate(paths)
        emissions = []
        for s, g in enumerate(model.emissions):
            sel = frames[labels == s]
            emissions.append(_fit_state(sel, n_mix, em_iter, None, init=g) if len(sel) else g)
        counts = _transition_counts(paths, S)
        A = _smoothed_transitions(counts)
        # smoothing is not the count maximiser; keep the old matrix if it scores better
        if _transition_score(A, counts) < _transition_score(model.transitions, counts):
            A = model.transitions
        model = HmmModel(A, emissions)
    model.history = history
    return model
