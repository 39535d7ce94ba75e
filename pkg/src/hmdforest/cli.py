"""Command-line interface: dataset prep, training, prediction, evaluation,
explanation, and feature selection.

Exit codes: 0 success, 1 usage error, 2 data error. Every run writes a
config-snapshot file into --outdir. An optional --config file supplies
key=value defaults whose keys mirror the flag names; explicit flags win.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cascade, embed, evalharness, explain, forest, hierarchy, metrics, seqio, store
from .errors import DataError
from .parallel import default_threads

PROG = "hmdforest"

TASKS = ("binary", "multilabel", "pipeline")
VARIANTS = (evalharness.VARIANT_HMD, evalharness.VARIANT_ONEHOT, evalharness.VARIANT_RF)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_data_flags(p, labels_required=False):
    p.add_argument("--fasta", help="FASTA file of peptide sequences")
    p.add_argument("--labels", required=labels_required,
                   help="TSV activity-label table (ids present in it are AMPs)")
    p.add_argument("--embeddings", help="embedding TSV ('#dim <d>' header)")
    p.add_argument("--onehot", action="store_true",
                   help="use one-hot encoded sequences instead of embeddings")
    p.add_argument("--onehot-max-len", type=int, default=embed.DEFAULT_ONE_HOT_MAX_LEN,
                   help="one-hot pad/truncate length")
    p.add_argument("--feature-subset",
                   help="file of feature indices (one per line) to project onto")


def _add_cascade_flags(p):
    p.add_argument("--trees", type=int, default=1000, help="trees per cascade forest")
    p.add_argument("--max-layers", type=int, default=20, help="cascade depth cap")
    p.add_argument("--patience", type=int, default=3,
                   help="stop after this many non-improving levels")
    p.add_argument("--k-inner", type=int, default=3,
                   help="inner folds for out-of-fold class vectors")
    p.add_argument("--scan", action="store_true", help="enable multi-grained scanning")
    p.add_argument("--window", type=int, default=100, help="scanning window size")
    p.add_argument("--stride", type=int, default=1, help="scanning stride")
    p.add_argument("--scan-trees", type=int, default=100, help="trees per scanning forest")
    p.add_argument("--min-samples-leaf", type=int, default=None,
                   help="leaf size floor (default: 2 random / 1 completely-random)")
    p.add_argument("--max-depth", type=int, default=None, help="tree depth cap")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: HMD_THREADS or 1)")
    p.add_argument("--outdir", default=".", help="directory for artifacts")
    p.add_argument("--config", help="key=value config file; flags win on conflict")


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-label counts and cardinality histogram")
    p.add_argument("--fasta", required=True, help="FASTA file of peptide sequences")
    p.add_argument("--labels", help="TSV activity-label table")
    p.add_argument("--out", help="stats TSV path (default: <outdir>/stats.tsv)")
    _add_common(p)

    p = sub.add_parser("dedup", help="drop duplicate sequences, OR-merging labels")
    p.add_argument("--fasta", required=True, help="FASTA file of peptide sequences")
    p.add_argument("--labels", help="TSV activity-label table")
    p.add_argument("--out-fasta", required=True, help="deduplicated FASTA path")
    p.add_argument("--out-labels", help="merged label table path")
    _add_common(p)

    p = sub.add_parser("train", help="fit a binary, multilabel, or pipeline model")
    p.add_argument("--task", choices=TASKS, default="pipeline", help="model kind")
    _add_data_flags(p, labels_required=True)
    _add_cascade_flags(p)
    p.add_argument("--out", required=True, help="model container path (.hmdf)")
    p.add_argument("--tau-binary", type=float, default=0.5, help="AMP gate threshold")
    p.add_argument("--tau-labels", help="comma-separated per-label thresholds (11)")
    _add_common(p)

    p = sub.add_parser("predict", help="score sequences with a trained model")
    p.add_argument("--model", required=True, help="model container path")
    _add_data_flags(p)
    p.add_argument("--out", help="verdict/score TSV (default: <outdir>/predictions.tsv)")
    p.add_argument("--rankings", help="also write per-label candidate rankings here")
    _add_common(p)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--task", choices=("binary", "multilabel"), default="multilabel",
                   help="evaluation task")
    p.add_argument("--k", type=int, default=5, help="fold count")
    p.add_argument("--trials", type=int, default=1, help="repeats over derived seeds")
    _add_data_flags(p, labels_required=True)
    _add_cascade_flags(p)
    p.add_argument("--out", help="report TSV (default: <outdir>/cv-report.tsv)")
    p.add_argument("--roc", action="store_true",
                   help="also write per-label ROC point TSVs from pooled held-out scores")
    _add_common(p)

    p = sub.add_parser("subset", help="small-sample experiments on the positive set")
    p.add_argument("--sizes", default="50,100,200", help="comma-separated subset sizes")
    p.add_argument("--k", type=int, default=5, help="fold count")
    _add_data_flags(p, labels_required=True)
    _add_cascade_flags(p)
    _add_common(p)

    p = sub.add_parser("ablation", help="run one ablation variant")
    p.add_argument("--variant", choices=VARIANTS, required=True, help="ablation variant")
    p.add_argument("--task", choices=("binary", "multilabel"), default="multilabel",
                   help="evaluation task")
    p.add_argument("--k", type=int, default=5, help="fold count")
    _add_data_flags(p, labels_required=True)
    _add_cascade_flags(p)
    p.add_argument("--out", help="report TSV (default: <outdir>/ablation-<variant>.tsv)")
    _add_common(p)

    p = sub.add_parser("explain", help="global surrogate weights for a trained model")
    p.add_argument("--model", required=True, help="model container path")
    _add_data_flags(p)
    p.add_argument("--label", default="amp",
                   help="'amp' or an activity label name to explain")
    p.add_argument("--n-samples", type=int, default=explain.DEFAULT_N_SAMPLES,
                   help="perturbations per instance")
    p.add_argument("--sigma", type=float, default=None, help="proximity kernel width")
    p.add_argument("--ridge", type=float, default=explain.DEFAULT_RIDGE,
                   help="ridge damping")
    p.add_argument("--instances", type=int, default=50,
                   help="instances averaged into the global weights")
    p.add_argument("--out", help="weights TSV (default: <outdir>/global-weights.tsv)")
    _add_common(p)

    p = sub.add_parser("select-features", help="pick the top-k features by global weight")
    p.add_argument("--weights", required=True, help="global-weights TSV")
    p.add_argument("--k", type=int, default=explain.DEFAULT_TOP_K, help="features to keep")
    p.add_argument("--abs", action="store_true", dest="by_abs",
                   help="rank by magnitude instead of signed weight")
    p.add_argument("--out", help="indices file (default: <outdir>/selected-features.txt)")
    _add_common(p)

    return parser


def _apply_config_file(parser, argv):
    """Load key=value defaults from --config into the invoked subparser;
    explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise DataError(f"cannot read config file: {e}") from None
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = _coerce(value.strip())
    command = next((a for a in rest if not a.startswith("-")), None)
    sub_actions = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    sub = sub_actions.choices.get(command)
    if sub is None:
        return
    known_dests = {a.dest for a in sub._actions}
    unknown = sorted(set(values) - known_dests)
    if unknown:
        raise UsageError(
            f"config keys not recognized by {command!r}: "
            + ", ".join(k.replace("_", "-") for k in unknown)
        )
    sub.set_defaults(**values)


def _coerce(value: str):
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def _resolve_threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


def _load_dataset(args) -> seqio.Dataset:
    if not args.fasta:
        raise UsageError("--fasta is required for this command")
    try:
        with open(args.fasta, "r", encoding="utf-8") as fh:
            records = seqio.parse_fasta(fh)
    except OSError as e:
        raise DataError(f"cannot read FASTA: {e}") from None
    labels = None
    if getattr(args, "labels", None):
        try:
            with open(args.labels, "r", encoding="utf-8") as fh:
                labels = seqio.parse_labels(fh)
        except OSError as e:
            raise DataError(f"cannot read labels: {e}") from None
    return seqio.build_dataset(records, labels, provenance=args.fasta)


def _load_features(args, dataset: seqio.Dataset | None) -> embed.FeatureMatrix:
    if args.embeddings and args.onehot:
        raise UsageError("--onehot conflicts with --embeddings")
    if args.embeddings:
        try:
            matrix = embed.load_embeddings(args.embeddings)
        except OSError as e:
            raise DataError(f"cannot read embeddings: {e}") from None
    elif args.onehot:
        if dataset is None:
            raise UsageError("--onehot needs --fasta")
        matrix = embed.one_hot_matrix(dataset, args.onehot_max_len)
    else:
        raise UsageError("either --embeddings or --onehot is required")
    if args.feature_subset:
        indices = explain.read_selected_indices(args.feature_subset)
        matrix = embed.select_columns(matrix, indices)
    return matrix


def _cascade_config(args) -> cascade.CascadeConfig:
    return cascade.CascadeConfig(
        n_trees=args.trees,
        max_layers=args.max_layers,
        patience=args.patience,
        k_inner=args.k_inner,
        seed=args.seed,
        scan=args.scan,
        window=args.window,
        stride=args.stride,
        scan_trees=args.scan_trees,
        min_samples_leaf=args.min_samples_leaf,
        max_depth=args.max_depth,
        threads=_resolve_threads(args),
    )


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _snapshot(args, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    skip = {"config", "command"}
    pairs = sorted(
        (k, v) for k, v in vars(args).items() if k not in skip
    )
    text = "\n".join(f"{k.replace('_', '-')}={v}" for k, v in pairs) + "\n"
    _write(os.path.join(outdir, f"{args.command}-config.txt"), text)


def _positives(dataset: seqio.Dataset) -> seqio.Dataset:
    pos = tuple(s for s in dataset if s.amp_label)
    return seqio.Dataset(pos, dataset.label_names, dataset.provenance)


# ----------------------------------------------------------- subcommands

def _cmd_stats(args):
    dataset = _load_dataset(args)
    stats = seqio.dataset_stats(dataset)
    out = args.out or os.path.join(args.outdir, "stats.tsv")
    _write(out, seqio.stats_tsv(stats, dataset.label_names))
    print(f"wrote {out} ({stats.n_records} records, {stats.n_labeled} labeled)")


def _cmd_dedup(args):
    dataset = _load_dataset(args)
    deduped, removed = seqio.deduplicate(dataset)
    _write(args.out_fasta, seqio.serialize_fasta((s.id, s.residues) for s in deduped))
    if args.out_labels:
        lines = ["\t".join(["id", *deduped.label_names])]
        for s in deduped:
            if s.activity_labels is not None:
                bits = "\t".join("1" if b else "0" for b in s.activity_labels)
                lines.append(f"{s.id}\t{bits}")
        _write(args.out_labels, "\n".join(lines) + "\n")
    print(f"removed {removed} duplicate records; kept {len(deduped)}")


def _cmd_train(args):
    dataset = _load_dataset(args)
    features = _load_features(args, dataset)
    config = _cascade_config(args)
    out = args.out
    if args.task == "pipeline":
        taus = None
        if args.tau_labels:
            taus = [float(t) for t in args.tau_labels.split(",")]
            if len(taus) != len(dataset.label_names):
                raise UsageError(
                    f"--tau-labels needs {len(dataset.label_names)} values"
                )
        model = hierarchy.train_pipeline(
            dataset, _positives(dataset), features, config,
            tau_binary=args.tau_binary, tau_labels=taus,
        )
        _write(os.path.join(args.outdir, "history-binary.tsv"),
               cascade.history_tsv(model.binary))
        _write(os.path.join(args.outdir, "history-multilabel.tsv"),
               cascade.history_tsv(model.multilabel))
    else:
        task_ds = dataset if args.task == "binary" else _positives(dataset)
        Y = evalharness.task_labels(task_ds, args.task)
        X = embed.join(task_ds, features)
        model = cascade.train_cascade(X, Y, config)
        _write(os.path.join(args.outdir, f"history-{args.task}.tsv"),
               cascade.history_tsv(model))
    store.save(model, out)
    print(f"wrote {out}")


def _cmd_predict(args):
    model = store.load(args.model)
    out = args.out or os.path.join(args.outdir, "predictions.tsv")
    if isinstance(model, hierarchy.PipelineModel):
        if args.embeddings:
            matrix = _load_features(args, None)
        else:
            dataset = _load_dataset(args)
            matrix = _load_features(args, dataset)
        verdicts, rankings = hierarchy.rank_candidates(model, matrix.ids, matrix.values)
        _write(out, hierarchy.verdicts_tsv(verdicts, model.label_names))
        if args.rankings:
            _write(args.rankings, hierarchy.rankings_tsv(rankings))
        n_amp = sum(1 for v in verdicts if v.is_amp)
        print(f"wrote {out} ({n_amp}/{len(verdicts)} predicted AMPs)")
        return
    if args.rankings:
        raise UsageError("--rankings only applies to pipeline models")
    if args.embeddings:
        matrix = _load_features(args, None)
    else:
        matrix = _load_features(args, _load_dataset(args))
    if isinstance(model, cascade.CascadeModel):
        scores = cascade.predict_cascade_batch(model, matrix.values)
    else:
        scores = forest.predict_forest_batch(model, matrix.values)
    lines = ["id\t" + "\t".join(f"score{j}" for j in range(scores.shape[1]))]
    for rid, row in zip(matrix.ids, scores):
        lines.append(rid + "\t" + "\t".join(repr(float(v)) for v in row))
    _write(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")


def _run_cv(args, dataset, features, config):
    if args.trials == 1:
        return evalharness.cross_validate(
            dataset, features, config, task=args.task, k=args.k, seed=args.seed,
            collect_scores=True,
        )
    fold_reports = []
    scores = truths = None
    for t in range(args.trials):
        rep, s, y = evalharness.cross_validate(
            dataset, features, config, task=args.task, k=args.k,
            seed=args.seed + t, collect_scores=True,
        )
        fold_reports.extend(rep.fold_reports)
        scores, truths = s, y  # ROC export uses the last trial's plan
    report = evalharness.aggregate_reports(
        fold_reports,
        evalharness.config_snapshot_text(config, task=args.task, k=args.k,
                                         seed=args.seed, trials=args.trials),
        0.0,
        args.task,
    )
    return report, scores, truths


def _roc_file_name(label: str) -> str:
    return "roc-" + "".join(c if c.isalnum() or c in "-+" else "_" for c in label) + ".tsv"


def _cmd_cv(args):
    dataset = _load_dataset(args)
    if args.task == "multilabel":
        dataset = _positives(dataset)
    features = _load_features(args, dataset)
    report, scores, truths = _run_cv(args, dataset, features, _cascade_config(args))
    out = args.out or os.path.join(args.outdir, "cv-report.tsv")
    _write(out, evalharness.report_tsv(report))
    if args.roc:
        names = ("AMP",) if args.task == "binary" else dataset.label_names
        for j, name in enumerate(names):
            col = truths[:, j]
            if col.all() or not col.any():
                continue
            points = metrics.roc_points(scores[:, j], col)
            _write(os.path.join(args.outdir, _roc_file_name(name)),
                   metrics.roc_tsv(points))
    names = ("AMP",) if args.task == "binary" else dataset.label_names
    sys.stdout.write(metrics.report_table(evalharness.per_label_means(report), names))
    sys.stdout.write(evalharness.report_summary(report))
    print(f"wrote {out}")


def _cmd_subset(args):
    dataset = _positives(_load_dataset(args))
    features = _load_features(args, dataset)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    reports = evalharness.subset_experiment(
        dataset, features, sizes, _cascade_config(args), seed=args.seed, k=args.k
    )
    for size, report in reports.items():
        out = os.path.join(args.outdir, f"subset-{size}.tsv")
        _write(out, evalharness.report_tsv(report))
        sys.stdout.write(f"[size {size}]\n" + evalharness.report_summary(report))
        print(f"wrote {out}")


def _cmd_ablation(args):
    dataset = _load_dataset(args)
    if args.task == "multilabel":
        dataset = _positives(dataset)
    features = None
    if args.variant != evalharness.VARIANT_ONEHOT:
        features = _load_features(args, dataset)
    elif args.embeddings:
        raise UsageError("--embeddings conflicts with the one-hot variant")
    report = evalharness.ablation_run(
        dataset, features, args.variant, _cascade_config(args),
        task=args.task, k=args.k, seed=args.seed,
        one_hot_max_len=args.onehot_max_len,
    )
    out = args.out or os.path.join(args.outdir, f"ablation-{args.variant}.tsv")
    _write(out, evalharness.report_tsv(report))
    sys.stdout.write(evalharness.report_summary(report))
    print(f"wrote {out}")


def _cmd_explain(args):
    model = store.load(args.model)
    if args.embeddings:
        matrix = _load_features(args, None)
    else:
        matrix = _load_features(args, _load_dataset(args))
    X = matrix.values
    if isinstance(model, hierarchy.PipelineModel):
        if args.label == "amp":
            score_fn = lambda rows: cascade.predict_cascade_batch(model.binary, rows)[:, 0]
        else:
            if args.label not in model.label_names:
                raise UsageError(f"unknown label {args.label!r}")
            j = model.label_names.index(args.label)
            score_fn = lambda rows: cascade.predict_cascade_batch(model.multilabel, rows)[:, j]
    elif isinstance(model, cascade.CascadeModel):
        j = 0 if args.label == "amp" else int(args.label)
        score_fn = lambda rows: cascade.predict_cascade_batch(model, rows)[:, j]
    else:
        raise DataError("explain needs a cascade or pipeline model")
    stats = explain.FeatureStats.from_matrix(X)
    take = min(args.instances, X.shape[0])
    rng = np.random.default_rng(args.seed)
    rows = X[rng.choice(X.shape[0], size=take, replace=False)]
    gw = explain.global_weights(
        score_fn, rows, stats,
        n_samples=args.n_samples, sigma=args.sigma, ridge=args.ridge, seed=args.seed,
    )
    out = args.out or os.path.join(args.outdir, "global-weights.tsv")
    _write(out, explain.weights_tsv(gw))
    print(f"wrote {out} ({gw.n_instances} instances averaged)")


def _cmd_select_features(args):
    with open(args.weights, "r", encoding="utf-8") as fh:
        gw = explain.parse_weights_tsv(fh.read())
    indices = explain.select_top_k(gw, k=args.k, by_abs=args.by_abs)
    out = args.out or os.path.join(args.outdir, "selected-features.txt")
    explain.write_selected_indices(indices, out)
    print(f"wrote {out} ({len(indices)} features)")


_COMMANDS = {
    "stats": _cmd_stats,
    "dedup": _cmd_dedup,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "cv": _cmd_cv,
    "subset": _cmd_subset,
    "ablation": _cmd_ablation,
    "explain": _cmd_explain,
    "select-features": _cmd_select_features,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        _snapshot(args, args.outdir)
        _COMMANDS[args.command](args)
        return 0
    except UsageError as e:
        print(f"{PROG}: usage error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"{PROG}: data error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
