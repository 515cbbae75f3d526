"""Config-driven experiments: repeated splits, scoring, reports and significance.

Output directory layout::

    metrics.csv                  mean over repeats, per variant x condition
    timings.csv                  per repeat and mean, train/test phases
    significance.csv             Wilcoxon tests, reference variant vs the rest
    normality.csv                KS statistic of each variant's sample
    report.txt                   condition x variant EER/AUC table
    roc_<condition>.svg          first repeat, one curve per variant
    roc/<variant>_<condition>.csv
    repeats/r<k>/metrics.csv
    repeats/r<k>/trials.csv      every scored trial of repeat k
    repeats/r<k>/models/<variant>.json
"""

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import corpus
from .errors import ConfigError, HybridSVError
from .evaluation import (
    ScoreSet,
    Trial,
    compute_auc,
    compute_eer,
    eer_threshold,
    measure_time,
    roc_points,
    write_metrics_csv,
    write_roc_csv,
    write_roc_svg,
)
from .features import FrameConfig, extract, read_feature_cache
from .modelio import save_model
from .pipelines import (
    DISPLAY_NAMES,
    VARIANTS,
    PipelineConfig,
    enroll_pipeline,
    score_claims,
    train_pipeline,
)
from .stats import ks_normality, wilcoxon_signed_rank, write_significance_csv

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
SUMMARY_ROWS = ("average", "pooled")


@dataclass
class ExperimentConfig:
    dataset_root: str
    schema: str = "generic_csv"
    dataset_name: str = ""
    split: dict = field(default_factory=lambda: {"protocol": "draw"})
    features: FrameConfig = field(default_factory=FrameConfig)
    variants: tuple = ("dnn_hmm", "dnn_gmm", "hmm_dnn", "gmm_dnn")
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    n_repeats: int = 5
    master_seed: int = 0
    output_dir: str = "results"
    significance: dict = field(default_factory=lambda: {"reference": "hmm_dnn", "samples": "fold_eer"})
    save_models: bool = True

    def __post_init__(self):
        if self.n_repeats < 1:
            raise ConfigError("n_repeats must be >= 1")
        self.variants = tuple(self.variants)
        if not self.variants:
            raise ConfigError("no variants selected")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ConfigError(f"unknown variants {bad}")
        if self.schema not in ("generic_csv", "ravdess_filename", "susas_layout"):
            raise ConfigError(f"unknown dataset schema {self.schema!r}")
        if self.split.get("protocol", "draw") not in ("draw", "fixed", "ravdess"):
            raise ConfigError(f"unknown split protocol {self.split.get('protocol')!r}")
        if self.significance.get("samples", "fold_eer") not in ("fold_eer", "trial_errors"):
            raise ConfigError("significance samples must be fold_eer or trial_errors")

    @property
    def name(self):
        return self.dataset_name or Path(self.dataset_root).stem

    def to_dict(self):
        return {
            "format_version": CONFIG_VERSION,
            "dataset": {"root": self.dataset_root, "schema": self.schema, "name": self.dataset_name},
            "split": self.split,
            "features": self.features.to_dict(),
            "variants": list(self.variants),
            "pipeline": self.pipeline.to_dict(),
            "n_repeats": self.n_repeats,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "significance": self.significance,
            "save_models": self.save_models,
        }

    @classmethod
    def from_dict(cls, doc, base_dir=None):
        if doc.get("format_version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported config format_version {doc.get('format_version')!r}")
        try:
            ds = doc["dataset"]
            root = Path(ds["root"])
            out = Path(doc.get("output_dir", "results"))
            if base_dir is not None:
                root = root if root.is_absolute() else Path(base_dir) / root
                out = out if out.is_absolute() else Path(base_dir) / out
            kwargs = dict(
                dataset_root=str(root),
                schema=ds.get("schema", "generic_csv"),
                dataset_name=ds.get("name", ""),
                split=dict(doc.get("split", {"protocol": "draw"})),
                features=FrameConfig.from_dict(doc.get("features", {})),
                pipeline=PipelineConfig.from_dict(doc.get("pipeline", {})),
                output_dir=str(out),
            )
            for key in ("n_repeats", "master_seed", "save_models"):
                if key in doc:
                    kwargs[key] = doc[key]
            if "variants" in doc:
                kwargs["variants"] = tuple(doc["variants"])
            if "significance" in doc:
                kwargs["significance"] = {"reference": "hmm_dnn", "samples": "fold_eer",
                                          **doc["significance"]}
            return cls(**kwargs)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc


def load_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(doc, base_dir=path.parent)


def save_config(path, config):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Data plumbing


def load_manifest(config):
    return corpus.build_manifest(config.dataset_root, config.schema, name=config.name)


def load_features(records, recipe, cache=None):
    """Features for each record: cache files are read, WAV files extracted."""
    cache = {} if cache is None else cache
    for r in records:
        if r.utterance_id in cache:
            continue
        if r.path.endswith(".feat"):
            f = read_feature_cache(r.path)
        else:
            f = extract(corpus.read_wav(r.path), recipe, r.utterance_id)
        cache[r.utterance_id] = f
    return cache


def repeat_seeds(master_seed, n_repeats):
    seqs = np.random.SeedSequence(master_seed).spawn(n_repeats)
    return [int(s.generate_state(1)[0]) for s in seqs]


def split_for_repeat(config, manifest, seed):
    sp = config.split
    protocol = sp.get("protocol", "draw")
    eval_conditions = tuple(sp.get("eval_conditions", corpus.EMOTIONS))
    if protocol == "ravdess":
        spec = corpus.ravdess_split(manifest, sp.get("n_train_speakers", 20), sp.get("n_eval_speakers", 4))
    elif protocol == "fixed":
        spec = corpus.SplitSpec(
            train_speakers=sp["train_speakers"], eval_speakers=sp["eval_speakers"],
            train_sentences=sp["train_sentences"], eval_sentences=sp["eval_sentences"],
            eval_conditions=eval_conditions,
        )
    else:
        spec = corpus.draw_split(
            manifest, sp["n_train_speakers"], sp["n_eval_speakers"], sp["n_train_sentences"],
            eval_conditions=eval_conditions, rng=seed,
        )
    return spec


def group_by_speaker(records, features):
    out = {}
    for r in records:
        out.setdefault(r.speaker_id, []).append(features[r.utterance_id])
    return out


def make_trials(test_records, enrolled):
    """One genuine trial per test utterance plus one impostor trial per other enrolled speaker."""
    trials = []
    for r in test_records:
        for spk in enrolled:
            trials.append(Trial(r.utterance_id, spk, spk == r.speaker_id, r.condition_label))
    return trials


def score_all(model, trials, features):
    by_utt = {}
    for i, t in enumerate(trials):
        by_utt.setdefault(t.utterance_id, []).append(i)
    scores = np.empty(len(trials))
    for uid, idx in by_utt.items():
        scores[idx] = score_claims(model, features[uid], [trials[i].claimed_speaker for i in idx])
    return ScoreSet.from_trials(trials, scores)


def condition_metrics(score_set, conditions):
    """{condition: (eer_percent, auc)} plus the across-condition average and pooled rows."""
    out = {}
    for c in conditions:
        sub = score_set.subset(c)
        if sub.scores.size == 0:
            continue
        out[c] = (compute_eer(roc_points(sub)), compute_auc(sub))
    if out:
        out["average"] = (float(np.mean([v[0] for v in out.values()])),
                          float(np.mean([v[1] for v in out.values()])))
    out["pooled"] = (compute_eer(roc_points(score_set)), compute_auc(score_set))
    return out


# ---------------------------------------------------------------------------
# Experiment


@dataclass
class RepeatResult:
    index: int
    seed: int
    split: corpus.SplitSpec
    n_train: int
    n_enroll: int
    n_test: int
    scores: dict = field(default_factory=dict)      # variant -> ScoreSet
    metrics: dict = field(default_factory=dict)     # variant -> condition -> (eer, auc)
    timings: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)    # variant -> message


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    repeats: list
    metrics_rows: list
    significance_rows: list
    normality_rows: list

    @property
    def failures(self):
        return {(r.index, v): msg for r in self.repeats for v, msg in r.failures.items()}

    @property
    def ok(self):
        return not self.failures


def run_repeat(config, manifest, features, index, seed):
    spec = split_for_repeat(config, manifest, seed)
    train, enroll, test = corpus.make_splits(manifest, spec)
    if not train or not enroll or not test:
        raise ConfigError(f"repeat {index}: empty partition "
                          f"(train={len(train)}, enroll={len(enroll)}, test={len(test)})")
    load_features(train + enroll + test, config.features, features)
    dev = group_by_speaker(train, features)
    enr = group_by_speaker(enroll, features)
    missing = spec.eval_speakers - set(enr)
    if missing:
        raise ConfigError(f"repeat {index}: eval speakers without enrollment data: {sorted(missing)}")
    enrolled = tuple(sorted(enr))
    trials = make_trials(test, enrolled)
    conditions = [c for c in corpus.CONDITIONS if c in spec.eval_conditions]

    res = RepeatResult(index, seed, spec, len(train), len(enroll), len(test))
    pipe_cfg = replace(config.pipeline, seed=seed)
    for variant in config.variants:
        try:
            _, model = measure_time(
                "train",
                lambda: enroll_pipeline(train_pipeline(variant, dev, pipe_cfg, config.features), enr),
                variant, config.name, res.timings)
            _, scores = measure_time("test", lambda: score_all(model, trials, features),
                                     variant, config.name, res.timings)
        except (HybridSVError, ValueError, ArithmeticError) as exc:
            log.error("repeat %d, %s: %s", index, variant, exc)
            res.failures[variant] = str(exc)
            continue
        res.scores[variant] = scores
        res.metrics[variant] = condition_metrics(scores, conditions)
        if config.save_models:
            mdir = Path(config.output_dir) / "repeats" / f"r{index}" / "models"
            mdir.mkdir(parents=True, exist_ok=True)
            save_model(mdir / f"{variant}.json", model)
    return res


def run_experiment(config):
    """Train, enroll and evaluate every variant on ``n_repeats`` splits and write all outputs."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(config)
    features = {}
    repeats = []
    for index, seed in enumerate(repeat_seeds(config.master_seed, config.n_repeats)):
        log.info("repeat %d/%d (seed %d)", index + 1, config.n_repeats, seed)
        repeats.append(run_repeat(config, manifest, features, index, seed))

    result = ExperimentResult(
        config, repeats,
        metrics_rows=average_metrics(config, repeats),
        significance_rows=[], normality_rows=[],
    )
    result.significance_rows, result.normality_rows = significance_tests(config, repeats)
    write_outputs(result)
    return result


def _metric_rows(config, metrics_by_variant):
    rows = []
    for variant in config.variants:
        for cond, (eer, auc) in metrics_by_variant.get(variant, {}).items():
            rows.append({"variant": variant, "dataset": config.name, "condition": cond,
                         "eer_percent": eer, "auc": auc})
    return rows


def average_metrics(config, repeats):
    acc = {}
    for rep in repeats:
        for variant, conds in rep.metrics.items():
            for cond, vals in conds.items():
                acc.setdefault(variant, {}).setdefault(cond, []).append(vals)
    means = {v: {c: tuple(float(x) for x in np.mean(vals, axis=0)) for c, vals in conds.items()}
             for v, conds in acc.items()}
    return _metric_rows(config, means)


def _trial_errors(score_set):
    thr = eer_threshold(roc_points(score_set))
    accept = score_set.scores >= thr
    return (accept != score_set.is_genuine).astype(np.float64)


def significance_tests(config, repeats):
    """Wilcoxon tests of the reference variant against every other variant, per condition."""
    ref = config.significance.get("reference", "hmm_dnn")
    mode = config.significance.get("samples", "fold_eer")
    ok = [v for v in config.variants if all(v in r.metrics for r in repeats)]
    if ref not in ok:
        return [], []
    conditions = [c for c in repeats[0].metrics[ref] if c not in SUMMARY_ROWS]

    def sample(variant, cond):
        if mode == "fold_eer":
            return np.array([r.metrics[variant][cond][0] for r in repeats])
        return np.concatenate([_trial_errors(r.scores[variant].subset(cond)) for r in repeats])

    sig, norm = [], []
    for cond in conditions:
        for v in ok:
            x = sample(v, cond)
            if x.size >= 2 and np.std(x) > 0:
                ks = ks_normality(x)
                norm.append({"dataset": config.name, "condition": cond, "model": v,
                             "statistic": ks.statistic, "p_value": ks.p_value})
            if v == ref:
                continue
            res = wilcoxon_signed_rank(sample(ref, cond), x)
            sig.append({"dataset": config.name, "condition": cond, "model_a": ref,
                        "model_b": v, "p_value": res.p_value, "method": res.method})
    return sig, norm


def format_report(config, rows):
    """Condition x variant table of EER (%) and AUC."""
    table = {}
    for r in rows:
        table.setdefault(r["condition"], {})[r["variant"]] = (r["eer_percent"], r["auc"])
    variants = [v for v in config.variants if any(v in t for t in table.values())]
    conds = [c for c in corpus.CONDITIONS if c in table] + [c for c in SUMMARY_ROWS if c in table]
    head = f"{'Condition':<10}" + "".join(f"{DISPLAY_NAMES[v]:>18}" for v in variants)
    sub = f"{'':<10}" + "".join(f"{'EER':>10}{'AUC':>8}" for _ in variants)
    lines = [f"Speaker verification, {config.name}: percentage EER and AUC "
             f"(mean of {config.n_repeats} repeat(s))", head, sub]
    for c in conds:
        cells = []
        for v in variants:
            if v in table[c]:
                eer, auc = table[c][v]
                cells.append(f"{eer:>10.2f}{auc:>8.2f}")
            else:
                cells.append(f"{'-':>10}{'-':>8}")
        lines.append(f"{c.capitalize():<10}" + "".join(cells))
    return "\n".join(lines) + "\n"


def write_trials_csv(path, trials_scores):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variant", "condition", "claimed_speaker", "is_genuine", "score"))
        for variant, ss in trials_scores.items():
            for s, g, c, k in zip(ss.scores, ss.is_genuine, ss.conditions, ss.claimed):
                w.writerow((variant, c, k, int(g), repr(float(s))))


def write_timings_csv(path, config, repeats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variant", "dataset", "phase", "repeat", "elapsed_seconds"))
        acc = {}
        for rep in repeats:
            for t in rep.timings:
                w.writerow((t.variant, t.dataset, t.phase, rep.index, repr(t.elapsed_seconds)))
                acc.setdefault((t.variant, t.phase), []).append(t.elapsed_seconds)
        for (variant, phase), vals in acc.items():
            w.writerow((variant, config.name, phase, "mean", repr(float(np.mean(vals)))))


def split_summary(rep):
    """JSON-ready record of who and what a repeat trained and tested on."""
    s = rep.split
    return {
        "seed": rep.seed,
        "n_train": rep.n_train,
        "n_enroll": rep.n_enroll,
        "n_test": rep.n_test,
        "train_speakers": sorted(s.train_speakers),
        "eval_speakers": sorted(s.eval_speakers),
        "train_sentences": sorted(s.train_sentences),
        "eval_sentences": sorted(s.eval_sentences),
    }


def write_outputs(result):
    config = result.config
    out = Path(config.output_dir)
    write_metrics_csv(out / "metrics.csv", result.metrics_rows)
    write_timings_csv(out / "timings.csv", config, result.repeats)
    write_significance_csv(out / "significance.csv", result.significance_rows)
    with open(out / "normality.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("dataset", "condition", "model", "statistic", "p_value"))
        for r in result.normality_rows:
            w.writerow((r["dataset"], r["condition"], r["model"],
                        repr(float(r["statistic"])), repr(float(r["p_value"]))))
    (out / "report.txt").write_text(format_report(config, result.metrics_rows))
    save_config(out / "config.json", config)

    for rep in result.repeats:
        rdir = out / "repeats" / f"r{rep.index}"
        rdir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(rdir / "metrics.csv", _metric_rows(config, rep.metrics))
        write_trials_csv(rdir / "trials.csv", rep.scores)
        (rdir / "split.json").write_text(json.dumps(split_summary(rep), indent=2) + "\n")
        if rep.failures:
            (rdir / "failures.json").write_text(json.dumps(rep.failures, indent=2) + "\n")

    if result.repeats and result.repeats[0].scores:
        write_roc_outputs(out, result.repeats[0].scores)


def write_roc_outputs(out, scores_by_variant):
    out = Path(out)
    rdir = out / "roc"
    rdir.mkdir(parents=True, exist_ok=True)
    conditions = sorted({c for ss in scores_by_variant.values() for c in ss.conditions},
                        key=corpus.CONDITIONS.index)
    for cond in conditions + ["pooled"]:
        curves = {}
        for variant, ss in scores_by_variant.items():
            sub = ss if cond == "pooled" else ss.subset(cond)
            try:
                curve = roc_points(sub)
            except HybridSVError:
                continue
            write_roc_csv(rdir / f"{variant}_{cond}.csv", curve)
            curves[f"{DISPLAY_NAMES[variant]} (AUC {compute_auc(sub):.2f})"] = curve
        if curves:
            write_roc_svg(out / f"roc_{cond}.svg", curves, title=cond.capitalize())
