"""Command-line entry point: ``hybridsv <command> [options]``.

Exit status: 0 on success, 1 on validation errors (bad config, missing or
malformed inputs), 2 on runtime failures (training, scoring).
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import corpus, experiment
from .errors import ConfigError, FormatError, HybridSVError
from .evaluation import read_metrics_csv, read_roc_csv, write_metrics_csv, write_roc_svg
from .features import FeatureMatrix, write_feature_cache
from .modelio import load_model, save_model
from .pipelines import DISPLAY_NAMES, VARIANTS, enroll_pipeline, train_pipeline
from .stats import ks_normality, wilcoxon_signed_rank, write_significance_csv
from .synth import generate_synthetic_corpus

log = logging.getLogger("hybridsv")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ValidationError(Exception):
    pass


def _variants(text):
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in names if v not in VARIANTS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown variants {bad}; choose from {', '.join(VARIANTS)}")
    return tuple(names)


def _load(args):
    if not args.config:
        raise ValidationError("--config is required")
    cfg = experiment.load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "variants", None):
        cfg.variants = args.variants
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "repeats", None) is not None:
        if args.repeats < 1:
            raise ValidationError("--repeats must be >= 1")
        cfg.n_repeats = args.repeats
    return cfg


def _first_split(cfg):
    manifest = experiment.load_manifest(cfg)
    seed = experiment.repeat_seeds(cfg.master_seed, 1)[0]
    spec = experiment.split_for_repeat(cfg, manifest, seed)
    train, enroll, test = corpus.make_splits(manifest, spec)
    return seed, spec, train, enroll, test


def cmd_synth(args):
    if args.speakers < 2:
        raise ValidationError("--speakers must be >= 2")
    if args.separation < 0:
        raise ValidationError("--separation must be >= 0")
    m = generate_synthetic_corpus(
        args.speakers, args.separation, args.seed, args.out,
        n_sentences=args.sentences, n_repetitions=args.repetitions, render=args.render,
    )
    print(f"wrote {len(m)} utterances for {len(m.speakers)} speakers to {Path(args.out) / 'manifest.csv'}")


def cmd_extract(args):
    cfg = _load(args)
    manifest = experiment.load_manifest(cfg)
    out = Path(cfg.output_dir) / "features"
    out.mkdir(parents=True, exist_ok=True)
    feats = experiment.load_features(manifest.records, cfg.features)
    records = []
    for r in manifest.records:
        path = out / (r.utterance_id.replace("/", "__") + ".feat")
        write_feature_cache(path, FeatureMatrix(feats[r.utterance_id].values, r.utterance_id))
        records.append(replace(r, path=str(path)))
    corpus.write_manifest_csv(corpus.DatasetManifest(records, manifest.name), out / "manifest.csv",
                              relative_to=out)
    print(f"extracted {len(records)} feature files to {out}")


def cmd_train(args):
    cfg = _load(args)
    seed, spec, train, _, _ = _first_split(cfg)
    feats = experiment.load_features(train, cfg.features)
    dev = experiment.group_by_speaker(train, feats)
    mdir = Path(cfg.output_dir) / "models"
    mdir.mkdir(parents=True, exist_ok=True)
    pipe = replace(cfg.pipeline, seed=seed)
    for v in cfg.variants:
        model = train_pipeline(v, dev, pipe, cfg.features)
        save_model(mdir / f"{v}.json", model)
        print(f"{v}: trained on {len(train)} utterances of {len(dev)} speakers")


def cmd_enroll(args):
    cfg = _load(args)
    seed, spec, _, enroll, _ = _first_split(cfg)
    feats = experiment.load_features(enroll, cfg.features)
    enr = experiment.group_by_speaker(enroll, feats)
    mdir = Path(cfg.output_dir) / "models"
    for v in cfg.variants:
        path = mdir / f"{v}.json"
        if not path.is_file():
            raise ValidationError(f"{path} missing; run 'train' first")
        model = enroll_pipeline(load_model(path), enr)
        save_model(mdir / f"{v}.enrolled.json", model)
        print(f"{v}: enrolled {len(enr)} speakers")


def cmd_evaluate(args):
    cfg = _load(args)
    _, spec, _, enroll, test = _first_split(cfg)
    feats = experiment.load_features(test, cfg.features)
    out = Path(cfg.output_dir)
    conditions = [c for c in corpus.CONDITIONS if c in spec.eval_conditions]
    scores, metrics = {}, {}
    for v in cfg.variants:
        path = out / "models" / f"{v}.enrolled.json"
        if not path.is_file():
            raise ValidationError(f"{path} missing; run 'enroll' first")
        model = load_model(path)
        trials = experiment.make_trials(test, model.enroll_speaker_ids)
        scores[v] = experiment.score_all(model, trials, feats)
        metrics[v] = experiment.condition_metrics(scores[v], conditions)
    rows = experiment._metric_rows(cfg, metrics)
    write_metrics_csv(out / "metrics.csv", rows)
    experiment.write_roc_outputs(out, scores)
    report = experiment.format_report(replace(cfg, n_repeats=1), rows)
    (out / "report.txt").write_text(report)
    print(report, end="")


def cmd_compare(args):
    """Significance tests from per-repeat metrics CSVs (one per fold)."""
    src = Path(args.results or (args.out or ""))
    files = sorted(src.glob("repeats/r*/metrics.csv"), key=lambda p: int(p.parent.name[1:]))
    if not files:
        raise ValidationError(f"no repeats/r*/metrics.csv under {src}")
    folds = [read_metrics_csv(f) for f in files]
    table = {}
    for k, rows in enumerate(folds):
        for r in rows:
            table.setdefault((r["dataset"], r["condition"], r["variant"]), {})[k] = r["eer_percent"]
    ref = args.reference
    sig = []
    norm_lines = ["dataset,condition,model,statistic,p_value"]
    keys = sorted({(d, c) for d, c, _ in table})
    for dataset, cond in keys:
        if cond in experiment.SUMMARY_ROWS:
            continue
        ref_vals = table.get((dataset, cond, ref))
        if ref_vals is None or len(ref_vals) != len(folds):
            continue
        for (d, c, v), vals in sorted(table.items()):
            if (d, c) != (dataset, cond) or len(vals) != len(folds):
                continue
            x = np.array([vals[k] for k in range(len(folds))])
            if x.size >= 2 and np.std(x) > 0:
                ks = ks_normality(x)
                norm_lines.append(f"{d},{c},{v},{ks.statistic!r},{ks.p_value!r}")
            if v == ref:
                continue
            a = np.array([ref_vals[k] for k in range(len(folds))])
            res = wilcoxon_signed_rank(a, x)
            sig.append({"dataset": d, "condition": c, "model_a": ref, "model_b": v,
                        "p_value": res.p_value, "method": res.method})
    dest = Path(args.out or src)
    dest.mkdir(parents=True, exist_ok=True)
    write_significance_csv(dest / "significance.csv", sig)
    (dest / "normality.csv").write_text("\n".join(norm_lines) + "\n")
    for r in sig:
        print(f"{r['condition']:<10} {DISPLAY_NAMES[r['model_a']]} vs {DISPLAY_NAMES[r['model_b']]:<8} "
              f"p = {r['p_value']:.3f} ({r['method']})")


def cmd_plot(args):
    src = Path(args.results or (args.out or ""))
    files = sorted((src / "roc").glob("*.csv"))
    if not files:
        raise ValidationError(f"no ROC CSVs under {src / 'roc'}")
    by_cond = {}
    for f in files:
        # variant names contain an underscore; the condition is the last field
        head, _, cond = f.stem.rpartition("_")
        by_cond.setdefault(cond, {})[DISPLAY_NAMES.get(head, head)] = read_roc_csv(f)
    dest = Path(args.out or src)
    dest.mkdir(parents=True, exist_ok=True)
    for cond, curves in sorted(by_cond.items()):
        write_roc_svg(dest / f"roc_{cond}.svg", curves, title=cond.capitalize())
    print(f"wrote {len(by_cond)} ROC plots to {dest}")


def cmd_run(args):
    cfg = _load(args)
    result = experiment.run_experiment(cfg)
    print((Path(cfg.output_dir) / "report.txt").read_text(), end="")
    if not result.ok:
        for (rep, variant), msg in sorted(result.failures.items()):
            print(f"repeat {rep} {variant} FAILED: {msg}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hybridsv", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True, variants=True, repeats=False):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory (overrides the config)")
        if seed:
            sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        if variants:
            sp.add_argument("--variants", type=_variants, help="comma-separated variant list")
        if repeats:
            sp.add_argument("--repeats", type=int, help="number of repeated splits")

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--speakers", type=int, default=10)
    s.add_argument("--separation", type=float, default=3.0)
    s.add_argument("--sentences", type=int, default=6)
    s.add_argument("--repetitions", type=int, default=3)
    s.add_argument("--render", choices=("features", "wav"), default="features")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("extract", help="extract feature-cache files for a dataset")
    common(s, seed=False, variants=False)
    s.set_defaults(func=cmd_extract)

    for name, func, text in (("train", cmd_train, "train development models"),
                             ("enroll", cmd_enroll, "enroll evaluation speakers"),
                             ("evaluate", cmd_evaluate, "score test trials of enrolled models")):
        s = sub.add_parser(name, help=text)
        common(s)
        s.set_defaults(func=func)

    s = sub.add_parser("compare", help="Wilcoxon/KS tests across repeats of a run")
    s.add_argument("--config")
    s.add_argument("--results", help="run output directory (default: --out)")
    s.add_argument("--out")
    s.add_argument("--reference", default="hmm_dnn", choices=VARIANTS)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("plot", help="ROC SVGs from roc/*.csv")
    s.add_argument("--config")
    s.add_argument("--results", help="directory holding roc/ (default: --out)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("run", help="full experiment: repeats x variants")
    common(s, repeats=True)
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except (ValidationError, ConfigError, FormatError, FileNotFoundError,
            corpus.EmptyManifestError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (HybridSVError, ValueError, ArithmeticError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
