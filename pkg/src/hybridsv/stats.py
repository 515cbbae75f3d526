"""Paired significance testing between error-rate samples."""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov, ndtr
from scipy.stats import rankdata

from .errors import DegenerateError

EXACT_MAX_N = 25


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str  # "exact" or "normal_approx"

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


def _paired(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size < 1 or a.size != b.size:
        raise ValueError("paired samples must be non-empty and of equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    return a, b


def signed_rank_null_counts(ranks):
    """Number of sign assignments giving each value of 2*W+.

    ``ranks`` may contain half-integers (tied averages); doubling makes
    them integral so the distribution is counted exactly by dynamic
    programming over ranks. Index ``s`` of the result holds the count for
    ``W+ = s / 2``.
    """
    doubled = np.rint(2 * np.asarray(ranks)).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    top = 0
    for r in doubled:
        counts[r:top + r + 1] = counts[r:top + r + 1] + counts[:top + 1]
        top += r
    return counts


def wilcoxon_signed_rank(a, b):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped. Up to 25 non-zero pairs the p-value is
    exact over all sign assignments; beyond that a normal approximation
    with tie and continuity corrections is used. The statistic is
    ``min(W+, W-)``.
    """
    a, b = _paired(a, b)
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        return TestResult(0.0, 1.0, "exact")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_MAX_N:
        counts = signed_rank_null_counts(ranks)
        k = int(round(2 * w))
        tail = int(counts[:k + 1].sum())
        p = min(1.0, 2 * tail / 2**n)
        return TestResult(w, float(p), "exact")

    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes**3 - tie_sizes) / 48.0
    z = max(0.0, (mean - w - 0.5)) / math.sqrt(var)
    return TestResult(w, float(min(1.0, 2.0 * (1.0 - ndtr(z)))), "normal_approx")


def ks_normality(sample, mean=None, sd=None):
    """One-sample Kolmogorov-Smirnov distance to a normal distribution.

    Mean and standard deviation are estimated from the sample unless given.
    With estimated parameters the asymptotic Kolmogorov p-value is only
    approximate (conservative). ``statistic`` is D.
    """
    x = np.sort(np.asarray(sample, dtype=np.float64).reshape(-1))
    n = x.size
    if n < 1:
        raise ValueError("empty sample")
    if mean is None:
        mean = float(x.mean())
    if sd is None:
        if n < 2:
            raise DegenerateError("cannot estimate a standard deviation from one value")
        sd = float(x.std(ddof=1))
    if not sd > 0:
        raise DegenerateError("sample has zero standard deviation")
    cdf = ndtr((x - mean) / sd)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    p = float(np.clip(kolmogorov(math.sqrt(n) * D), 0.0, 1.0))
    return TestResult(D, p, "normal_approx")


SIGNIFICANCE_COLUMNS = ("dataset", "condition", "model_a", "model_b", "p_value", "method")


def write_significance_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGNIFICANCE_COLUMNS)
        for r in rows:
            w.writerow([r["dataset"], r["condition"], r["model_a"], r["model_b"],
                        repr(float(r["p_value"])), r["method"]])


def read_significance_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["p_value"] = float(r["p_value"])
    return rows
