"""Verification metrics and significance tests on made-up scores."""

# %%
import numpy as np

from hybridsv.evaluation import ScoreSet, compute_auc, compute_eer, eer_threshold, percentage_decrease, roc_points
from hybridsv.stats import ks_normality, wilcoxon_signed_rank

rng = np.random.default_rng(3)

# %% [markdown]
# Genuine scores sit one unit above impostors. The ROC sweep accepts a
# trial when its score reaches the threshold.

# %%
gen = rng.normal(1.0, 1.0, 300)
imp = rng.normal(0.0, 1.0, 900)
ss = ScoreSet(np.concatenate([gen, imp]), [True] * 300 + [False] * 900)
curve = roc_points(ss)
print(f"EER {compute_eer(curve):.2f}% at threshold {eer_threshold(curve):.3f}, AUC {compute_auc(ss):.3f}")

# %% [markdown]
# Relative reduction of one error rate against another.

# %%
print(f"{percentage_decrease(11.5, 0.01):.4f}% less error")

# %% [markdown]
# Five repeats of two systems: Wilcoxon on the paired EERs, and a
# normality check on each system's values.

# %%
a = np.array([12.1, 10.4, 13.3, 11.0, 12.6])
b = a + np.array([2.2, 1.5, 3.1, 0.4, 2.8])
print(wilcoxon_signed_rank(a, b))
print(ks_normality(a))
