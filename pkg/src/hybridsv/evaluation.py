"""Verification metrics: ROC sweep, EER, AUC, timing and EER comparisons.

A trial is accepted when ``score >= threshold``.
"""

import csv
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateError


@dataclass(frozen=True)
class Trial:
    utterance_id: str
    claimed_speaker: str
    is_genuine: bool
    condition_label: str


@dataclass(frozen=True, eq=False)
class ScoreSet:
    scores: np.ndarray
    is_genuine: np.ndarray
    conditions: tuple = ()
    claimed: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        g = np.asarray(self.is_genuine, dtype=bool).reshape(-1)
        if s.shape != g.shape:
            raise ValueError("one genuine flag per score")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "is_genuine", g)
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "claimed", tuple(self.claimed))

    @classmethod
    def from_trials(cls, trials, scores):
        trials = list(trials)
        return cls(scores, [t.is_genuine for t in trials],
                   [t.condition_label for t in trials], [t.claimed_speaker for t in trials])

    @property
    def genuine(self):
        return self.scores[self.is_genuine]

    @property
    def impostor(self):
        return self.scores[~self.is_genuine]

    def subset(self, condition):
        mask = np.array([c == condition for c in self.conditions], dtype=bool)
        return ScoreSet(self.scores[mask], self.is_genuine[mask],
                        [c for c, m in zip(self.conditions, mask) if m],
                        [c for c, m in zip(self.claimed, mask) if m])

    def check(self):
        if not self.is_genuine.any() or self.is_genuine.all():
            raise DegenerateError("need at least one genuine and one impostor trial")


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Sweep from +inf down to -inf; far and tar are non-decreasing."""

    thresholds: np.ndarray
    far: np.ndarray
    tar: np.ndarray

    @property
    def frr(self):
        return 1.0 - self.tar

    def __len__(self):
        return self.thresholds.size


def roc_points(scores):
    """ROC points at every distinct score plus +-inf sentinels."""
    scores.check()
    thr = np.unique(scores.scores)[::-1]
    n_gen = int(scores.is_genuine.sum())
    n_imp = scores.is_genuine.size - n_gen
    # counts of scores >= each threshold via sorted search
    gen_sorted = np.sort(scores.genuine)
    imp_sorted = np.sort(scores.impostor)
    acc_gen = n_gen - np.searchsorted(gen_sorted, thr, side="left")
    acc_imp = n_imp - np.searchsorted(imp_sorted, thr, side="left")
    thresholds = np.concatenate([[np.inf], thr, [-np.inf]])
    far = np.concatenate([[0], acc_imp, [n_imp]]) / n_imp
    tar = np.concatenate([[0], acc_gen, [n_gen]]) / n_gen
    return RocCurve(thresholds, far, tar)


def eer_from_rates(far, frr):
    """EER (fraction) by linear interpolation where FAR - FRR changes sign.

    ``far`` must be non-decreasing and ``frr`` non-increasing along the sweep.
    """
    far = np.asarray(far, dtype=np.float64)
    frr = np.asarray(frr, dtype=np.float64)
    if far.size < 2 or far[0] > frr[0] or far[-1] < frr[-1]:
        raise DegenerateError("FAR and FRR never cross on this sweep")
    diff = far - frr
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0:
        return float(far[k])
    t = -diff[k - 1] / (diff[k] - diff[k - 1])
    return float(far[k - 1] + t * (far[k] - far[k - 1]))


def compute_eer(curve):
    """Equal error rate in percent."""
    return 100.0 * eer_from_rates(curve.far, curve.frr)


def compute_auc(scores):
    """P(genuine > impostor) + P(tie) / 2, via the Mann-Whitney rank sum."""
    scores.check()
    ranks = rankdata(scores.scores)
    n_gen = int(scores.is_genuine.sum())
    n_imp = scores.is_genuine.size - n_gen
    u = ranks[scores.is_genuine].sum() - n_gen * (n_gen + 1) / 2.0
    return float(u / (n_gen * n_imp))


def eer_threshold(curve):
    """Threshold of the sweep point closest to the EER crossing."""
    gap = np.abs(curve.far - curve.frr)
    i = int(np.argmin(gap))
    return float(curve.thresholds[i])


def percentage_decrease(eer_prev, eer_new):
    """Relative EER reduction in percent."""
    if eer_prev <= 0:
        raise ValueError("previous EER must be positive")
    return (eer_prev - eer_new) / eer_prev * 100.0


# ---------------------------------------------------------------------------
# Timing


@dataclass(frozen=True)
class TimingReport:
    phase: str
    variant: str
    dataset: str
    elapsed_seconds: float

    def __post_init__(self):
        if self.elapsed_seconds < 0:
            raise ValueError("elapsed time cannot be negative")


def measure_time(phase, action, variant="", dataset="", table=None):
    """Run ``action()`` and time it with the monotonic clock.

    Returns (report, result). The report is appended to ``table`` if given.
    """
    start = time.perf_counter()
    result = action()
    report = TimingReport(phase, variant, dataset, time.perf_counter() - start)
    if table is not None:
        table.append(report)
    return report, result


@contextmanager
def timed(phase, variant="", dataset="", table=None):
    """Context-manager form of :func:`measure_time`; yields a one-item list."""
    box = []
    start = time.perf_counter()
    try:
        yield box
    finally:
        report = TimingReport(phase, variant, dataset, time.perf_counter() - start)
        box.append(report)
        if table is not None:
            table.append(report)


# ---------------------------------------------------------------------------
# Exports

ROC_COLUMNS = ("threshold", "far", "tar")
METRIC_COLUMNS = ("variant", "dataset", "condition", "eer_percent", "auc")


def _fmt(x):
    return repr(float(x))


def write_roc_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROC_COLUMNS)
        for t, f, a in zip(curve.thresholds, curve.far, curve.tar):
            w.writerow([_fmt(t), _fmt(f), _fmt(a)])


def read_roc_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return RocCurve(*(np.array([float(r[c]) for r in rows]) for c in ROC_COLUMNS))


def write_metrics_csv(path, rows):
    """``rows`` are dicts with the metric columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([r["variant"], r["dataset"], r["condition"],
                        _fmt(r["eer_percent"]), _fmt(r["auc"])])


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["eer_percent"] = float(r["eer_percent"])
        r["auc"] = float(r["auc"])
    return rows


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def write_roc_svg(path, curves, title=""):
    """SVG with one ROC polyline per entry of ``curves`` (label -> RocCurve)
    and the chance diagonal."""
    size, pad = 360, 48
    span = size - 2 * pad

    def xy(far, tar):
        return pad + far * span, size - pad - tar * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20 * len(curves)}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="black"/>',
        '<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="gray" stroke-dasharray="4,3"/>'
        .format(*xy(0, 0), *xy(1, 1)),
        f'<text x="{size / 2}" y="{size - 12}" text-anchor="middle">False acceptance rate</text>',
        f'<text x="14" y="{size / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {size / 2})">True acceptance rate</text>',
    ]
    if title:
        parts.append(f'<text x="{size / 2}" y="{pad / 2}" text-anchor="middle">{escape(title)}</text>')
    for tick in (0.0, 0.5, 1.0):
        x, y = xy(tick, 0)
        parts.append(f'<text x="{x:.2f}" y="{y + 14:.2f}" text-anchor="middle">{tick:g}</text>')
        x, y = xy(0, tick)
        parts.append(f'<text x="{x - 6:.2f}" y="{y + 4:.2f}" text-anchor="end">{tick:g}</text>')
    for i, (label, curve) in enumerate(curves.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join("{:.2f},{:.2f}".format(*xy(f, t)) for f, t in zip(curve.far, curve.tar))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = size + 20 * i + 4
        parts.append(f'<line x1="{pad}" y1="{ly}" x2="{pad + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{pad + 26}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
