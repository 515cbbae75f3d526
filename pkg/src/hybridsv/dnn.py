"""Feed-forward ReLU/softmax classifier trained by minibatch SGD with momentum."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax

from .errors import DivergenceError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    epochs: int = 150
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")


@dataclass(eq=False)
class DnnModel:
    """Dense layers; ``weights[l]`` has shape (fan_in, fan_out)."""

    weights: list
    biases: list
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        if not self.weights or len(self.weights) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.size != w.shape[1]:
                raise ValueError(f"layer {l}: weight {w.shape} and bias {b.shape} disagree")
            if l and w.shape[0] != self.weights[l - 1].shape[1]:
                raise ValueError(f"layer {l}: fan-in {w.shape[0]} does not chain")
        if self.weights[-1].shape[1] < 2:
            raise ValueError("output layer needs at least 2 classes")

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self):
        return self.weights[0].shape[0]

    @property
    def n_outputs(self):
        return self.weights[-1].shape[1]

    def copy(self):
        return DnnModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def he_uniform(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def dnn_init(layer_sizes, seed=0):
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights = [he_uniform(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
    return DnnModel(weights, [np.zeros(b) for b in sizes[1:]])


def _inputs(model, x):
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ValueError(f"input dimension {X.shape[-1]} does not match {model.n_inputs}")
    return X


def hidden_features(model, x):
    """Activations of the last hidden layer (the input itself if there is none)."""
    h = _inputs(model, x)
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    return h


def logits(model, x):
    return hidden_features(model, x) @ model.weights[-1] + model.biases[-1]


def dnn_log_proba(model, x):
    return log_softmax(logits(model, x), axis=1)


def dnn_forward(model, x):
    """Softmax class probabilities; a vector in gives a vector out."""
    p = np.exp(dnn_log_proba(model, x))
    return p[0] if np.ndim(x) == 1 else p


def loss_and_gradients(model, X, labels):
    """Mean cross-entropy over the batch and its gradients per layer.

    Returns (loss, weight_grads, bias_grads).
    """
    X = _inputs(model, X)
    labels = np.asarray(labels)
    acts = [X]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        acts.append(np.maximum(acts[-1] @ w + b, 0.0))
    logp = log_softmax(acts[-1] @ model.weights[-1] + model.biases[-1], axis=1)
    n = X.shape[0]
    rows = np.arange(n)
    loss = -float(logp[rows, labels].mean())

    delta = np.exp(logp)
    delta[rows, labels] -= 1.0
    delta /= n
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        gw[l] = acts[l].T @ delta
        gb[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ model.weights[l].T) * (acts[l] > 0)
    return loss, gw, gb


def dnn_train(model, X, labels, cfg, output_only=False):
    """Train a copy of ``model``; the input model is left untouched.

    With ``output_only`` the hidden layers are frozen and only the final
    layer is updated. Returns the trained model with ``loss_history`` set
    to the mean training cross-entropy of each epoch.
    """
    X = _inputs(model, X)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if X.shape[0] < 1 or labels.size != X.shape[0]:
        raise ValueError("need one label per training row")
    if labels.min() < 0 or labels.max() >= model.n_outputs:
        raise ValueError(f"labels must lie in [0, {model.n_outputs})")
    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    first = len(model.weights) - 1 if output_only else 0
    if output_only:
        # frozen hidden stack: train a one-layer net on its features
        X = hidden_features(model, X)
    vw = [np.zeros_like(w) for w in model.weights]
    vb = [np.zeros_like(b) for b in model.biases]
    head = DnnModel(model.weights[first:], model.biases[first:]) if output_only else model

    history = []
    n = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_gradients(head, X[idx], labels[idx])
            total += loss * idx.size
            for l in range(len(head.weights)):
                vw[first + l] = cfg.momentum * vw[first + l] - cfg.learning_rate * gw[l]
                vb[first + l] = cfg.momentum * vb[first + l] - cfg.learning_rate * gb[l]
                head.weights[l] += vw[first + l]
                head.biases[l] += vb[first + l]
        mean = total / n
        if not np.isfinite(mean):
            raise DivergenceError(epoch)
        history.append(mean)
    model.loss_history = history
    return model


def dnn_replace_output_layer(model, n_new_classes, seed=0):
    """Copy of ``model`` with a fresh he-uniform output layer of ``n_new_classes`` units."""
    if n_new_classes < 2:
        raise ValueError("need at least 2 output classes")
    rng = np.random.default_rng(seed)
    fan_in = model.weights[-1].shape[0]
    weights = [w.copy() for w in model.weights[:-1]] + [he_uniform(fan_in, n_new_classes, rng)]
    biases = [b.copy() for b in model.biases[:-1]] + [np.zeros(n_new_classes)]
    return DnnModel(weights, biases)


def accuracy(model, X, labels):
    return float(np.mean(np.argmax(logits(model, X), axis=1) == np.asarray(labels)))
