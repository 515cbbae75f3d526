"""Diagonal-covariance Gaussian mixtures trained by EM."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InsufficientDataError

VAR_FLOOR = 1e-6
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    # mean per-frame log-likelihood at each EM iteration; not persisted
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        k = self.weights.size
        if self.means.shape[0] != k or self.variances.shape != self.means.shape:
            raise ValueError("inconsistent GMM parameter shapes")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("GMM weights must be non-negative and sum to 1")
        if np.any(self.variances < VAR_FLOOR * (1 - 1e-12)):
            raise ValueError("GMM variance below floor")

    @property
    def n_components(self):
        return self.weights.size

    @property
    def dim(self):
        return self.means.shape[1]

    def copy(self):
        return GmmModel(self.weights.copy(), self.means.copy(), self.variances.copy())


def _as_rows(X, dim=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"dimension mismatch: model dim {dim}, input dim {X.shape[1]}")
    return X


def component_log_likelihoods(model, X):
    """Weighted per-component log densities, shape (n, k): log w_i + log N(x; mu_i, var_i)."""
    X = _as_rows(X, model.dim)
    out = np.empty((X.shape[0], model.n_components))
    log_norm = -0.5 * (model.dim * LOG_2PI + np.log(model.variances).sum(axis=1))
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    for i in range(model.n_components):
        diff = X - model.means[i]
        out[:, i] = log_w[i] + log_norm[i] - 0.5 * np.sum(diff * diff / model.variances[i], axis=1)
    return out


def gmm_log_likelihood(model, x):
    """log sum_i w_i N(x; mu_i, diag var_i). Scalar for a vector, array for a matrix."""
    scalar = np.ndim(x) == 1
    ll = logsumexp(component_log_likelihoods(model, x), axis=1)
    return float(ll[0]) if scalar else ll


def gmm_subclass_label(model, speaker_index, x):
    """Global subclass id ``speaker_index * n_components + argmax_i`` (ties -> lowest i)."""
    if speaker_index < 0:
        raise ValueError("speaker index must be non-negative")
    scalar = np.ndim(x) == 1
    best = np.argmax(component_log_likelihoods(model, x), axis=1)
    labels = speaker_index * model.n_components + best
    return int(labels[0]) if scalar else labels


def kmeans(X, k, rng, n_iter=20):
    """Lloyd's k-means seeded by farthest-point traversal from a random start.

    Returns (centroids, assignments).
    """
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        centers.append(X[int(np.argmax(d2))])
        d2 = np.minimum(d2, np.sum((X - centers[-1]) ** 2, axis=1))
    C = np.array(centers)
    assign = None
    for _ in range(n_iter):
        dist = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2) if n * k <= 2_000_000 \
            else np.stack([((X - c) ** 2).sum(axis=1) for c in C], axis=1)
        new = np.argmin(dist, axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(k):
            members = X[assign == j]
            if len(members):
                C[j] = members.mean(axis=0)
    return C, assign


def _init_from_kmeans(X, k, rng):
    C, assign = kmeans(X, k, rng)
    global_var = np.maximum(X.var(axis=0), VAR_FLOOR)
    weights = np.empty(k)
    variances = np.empty_like(C)
    for j in range(k):
        members = X[assign == j]
        weights[j] = len(members)
        variances[j] = members.var(axis=0) if len(members) > 1 else global_var
    weights = (weights + 1e-3) / (weights + 1e-3).sum()
    return GmmModel(weights, C, np.maximum(variances, VAR_FLOOR))


def gmm_fit(X, k, max_iter=1000, tol=1e-6, seed=0, init=None):
    """Fit a k-component diagonal GMM by EM.

    Stops when the mean log-likelihood changes by less than ``tol``.
    ``init`` warm-starts from an existing model instead of k-means.
    The returned model's ``history`` holds the mean log-likelihood of the
    parameters entering each iteration, plus the final parameters.
    """
    X = _as_rows(X)
    if not np.all(np.isfinite(X)):
        raise ValueError("training data must be finite")
    if k < 1 or max_iter < 1:
        raise ValueError("need k >= 1 and max_iter >= 1")
    n, d = X.shape
    if init is None:
        if n < k or np.unique(X, axis=0).shape[0] < k:
            raise InsufficientDataError(f"{n} rows ({np.unique(X, axis=0).shape[0]} distinct) "
                                        f"for {k} components")
        model = _init_from_kmeans(X, k, np.random.default_rng(seed))
    else:
        if init.dim != d:
            raise ValueError("warm-start model dimension mismatch")
        model = init.copy()
        k = model.n_components

    history = []
    for it in range(max_iter):
        comp = component_log_likelihoods(model, X)
        ll = logsumexp(comp, axis=1)
        history.append(float(ll.mean()))
        if it > 0 and abs(history[-1] - history[-2]) < tol:
            break
        resp = np.exp(comp - ll[:, None])
        nk = resp.sum(axis=0)
        weights = nk / n
        means = model.means.copy()
        variances = model.variances.copy()
        live = nk > 1e-10 * n
        # components with no support keep their previous parameters
        means[live] = (resp[:, live].T @ X) / nk[live, None]
        for i in np.flatnonzero(live):
            diff = X - means[i]
            variances[i] = resp[:, i] @ (diff * diff) / nk[i]
        model = GmmModel(weights / weights.sum(), means, np.maximum(variances, VAR_FLOOR))
    else:
        history.append(float(gmm_log_likelihood(model, X).mean()))
    model.history = history
    return model
