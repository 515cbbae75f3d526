"""A feed-forward network, its gradients, and output-layer transfer."""

# %%
import numpy as np

from hybridsv.dnn import (
    TrainConfig,
    accuracy,
    dnn_init,
    dnn_replace_output_layer,
    dnn_train,
    hidden_features,
)

rng = np.random.default_rng(1)

# %% [markdown]
# Train on four source classes, then swap the output layer for two new
# classes and fine-tune only that layer. Hidden weights stay put.

# %%
centers = rng.normal(0, 3, size=(6, 4))
X = np.concatenate([rng.normal(c, 1.0, size=(80, 4)) for c in centers[:4]])
y = np.repeat(np.arange(4), 80)
net = dnn_train(dnn_init([4, 32, 32, 4], seed=0), X, y, TrainConfig(epochs=40))
print("source accuracy", accuracy(net, X, y))

# %%
Xn = np.concatenate([rng.normal(c, 1.0, size=(40, 4)) for c in centers[4:]])
yn = np.repeat([0, 1], 40)
fresh = dnn_replace_output_layer(net, 2, seed=0)
tuned = dnn_train(fresh, Xn, yn, TrainConfig(epochs=40), output_only=True)
print("target accuracy", accuracy(tuned, Xn, yn))
same = np.array_equal(hidden_features(net, Xn), hidden_features(tuned, Xn))
print("hidden features unchanged:", same)
print("loss first/last epoch:", round(tuned.loss_history[0], 3), round(tuned.loss_history[-1], 3))
