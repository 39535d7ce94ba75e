"""Stratified cross-validation, small-sample subset experiments, and
ablation runners with aggregated reporting."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import embed
from .cascade import CascadeConfig, predict_cascade_batch, train_cascade
from .errors import DataError
from .forest import ForestConfig, MODE_RANDOM, _seed_tuple, predict_forest_batch, train_forest
from .metrics import MetricsReport, classification_report
from .seqio import Dataset

MODE_BINARY = "binary"
MODE_ITERATIVE = "iterative-multilabel"

TASK_BINARY = "binary"
TASK_MULTILABEL = "multilabel"

VARIANT_HMD = "hmd"
VARIANT_ONEHOT = "deep-forest-onehot"
VARIANT_RF = "random-forest-embed"

_TAG_CV = 0xC5
_TAG_SUBSET = 0x5B


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[str, ...], ...]
    seed: int
    mode: str

    @property
    def k(self) -> int:
        return len(self.folds)


def stratified_folds(dataset: Dataset, k: int = 5, seed: int = 0,
                     mode: str = MODE_BINARY) -> FoldPlan:
    """Disjoint folds covering the dataset.

    Binary mode shuffles each amp_label stratum and deals it round-robin, so
    per-stratum fold sizes differ by at most one. Multi-label mode runs
    greedy iterative stratification: repeatedly place an example of the
    currently rarest label into the fold with the greatest remaining need
    for that label, ties toward the smallest fold.
    """
    n = len(dataset)
    if k > n:
        raise DataError(f"cannot split {n} records into {k} folds")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_CV]))
    folds: list[list[str]] = [[] for _ in range(k)]

    if mode == MODE_BINARY:
        strata: dict[object, list[str]] = {}
        for s in dataset:
            strata.setdefault(s.amp_label, []).append(s.id)
        offset = 0
        for key in sorted(strata, key=repr):
            ids = strata[key]
            order = rng.permutation(len(ids))
            for pos, idx in enumerate(order):
                folds[(offset + pos) % k].append(ids[idx])
            offset += len(ids)
    elif mode == MODE_ITERATIVE:
        seqs = list(dataset)
        Y = np.array(
            [
                [bool(b) for b in (s.activity_labels or ())] or [False] * len(dataset.label_names)
                for s in seqs
            ],
            dtype=bool,
        )
        order = rng.permutation(len(seqs))
        remaining = list(order)  # positions into seqs, shuffled for tie determinism
        l = Y.shape[1]
        desired = np.tile(Y.sum(axis=0).astype(np.float64) / k, (k, 1))  # (k, l)
        capacity = np.full(k, n / k)
        assign: dict[int, int] = {}
        while remaining:
            counts = Y[remaining].sum(axis=0)
            active = np.flatnonzero(counts > 0)
            if active.size == 0:
                # label-free leftovers go to the emptiest folds
                for pos in remaining:
                    f = int(np.lexsort((np.arange(k), -capacity))[0])
                    assign[pos] = f
                    capacity[f] -= 1
                break
            j = int(active[np.argmin(counts[active])])
            batch = [pos for pos in remaining if Y[pos, j]]
            for pos in batch:
                need = desired[:, j]
                best = need.max()
                tied = np.flatnonzero(need == best)
                if tied.size > 1:
                    cap = capacity[tied]
                    tied = tied[cap == cap.max()]
                f = int(tied[0])
                assign[pos] = f
                desired[f, Y[pos]] -= 1.0
                capacity[f] -= 1
            batch_set = set(batch)
            remaining = [pos for pos in remaining if pos not in batch_set]
        for pos, f in assign.items():
            folds[f].append(seqs[pos].id)
    else:
        raise ValueError(f"unknown stratification mode {mode!r}")

    return FoldPlan(tuple(tuple(f) for f in folds), seed, mode)


@dataclass(frozen=True)
class ExperimentReport:
    fold_reports: tuple[MetricsReport, ...]
    means: dict[str, float]
    stds: dict[str, float]
    config_snapshot: str
    wall_clock: float
    task: str


def aggregate_reports(fold_reports, config_snapshot, wall, task) -> ExperimentReport:
    keys = sorted({k for r in fold_reports for k in r.scalars()})
    means = {}
    stds = {}
    for key in keys:
        vals = [r.scalars()[key] for r in fold_reports if key in r.scalars()]
        means[key] = float(np.mean(vals))
        stds[key] = float(np.std(vals))
    return ExperimentReport(tuple(fold_reports), means, stds, config_snapshot, wall, task)


def task_labels(dataset: Dataset, task: str) -> np.ndarray:
    if task == TASK_BINARY:
        for s in dataset:
            if s.amp_label is None:
                raise DataError(f"record {s.id!r} lacks an AMP label")
        return np.array([[1.0 if s.amp_label else 0.0] for s in dataset])
    if task == TASK_MULTILABEL:
        for s in dataset:
            if s.activity_labels is None:
                raise DataError(f"record {s.id!r} lacks activity labels")
        return np.array([[1.0 if b else 0.0 for b in s.activity_labels] for s in dataset])
    raise ValueError(f"unknown task {task!r}")


def _fit_predict_cascade(X_train, Y_train, X_test, config: CascadeConfig):
    model = train_cascade(X_train, Y_train, config)
    return predict_cascade_batch(model, X_test)


def _fit_predict_forest(X_train, Y_train, X_test, config: CascadeConfig):
    fc = ForestConfig(mode=MODE_RANDOM, n_trees=config.n_trees,
                      seed=config.seed, threads=config.threads)
    model = train_forest(X_train, Y_train, fc)
    return predict_forest_batch(model, X_test)


def cross_validate(dataset: Dataset, features: embed.FeatureMatrix,
                   config: CascadeConfig = CascadeConfig(), *,
                   task: str = TASK_MULTILABEL, k: int = 5, seed: int = 0,
                   threshold: float = 0.5, predictor=_fit_predict_cascade,
                   collect_scores: bool = False):
    """Train on k-1 folds, score the held-out fold, aggregate mean/std.

    Per-fold seeds derive from the master seed; a fold whose truth is
    degenerate for some label only loses that label from macro-AUC (the
    metrics layer warns and excludes it). With collect_scores=True the pooled
    held-out score matrix (dataset order) is returned alongside the report.
    """
    t0 = time.perf_counter()
    Y = task_labels(dataset, task)
    X = embed.join(dataset, features)
    mode = MODE_BINARY if task == TASK_BINARY else MODE_ITERATIVE
    plan = stratified_folds(dataset, k=k, seed=seed, mode=mode)
    index = {rid: i for i, rid in enumerate(dataset.ids)}
    reports = []
    pooled = np.zeros_like(Y, dtype=np.float64)
    for f, fold_ids in enumerate(plan.folds):
        test_idx = np.array([index[r] for r in fold_ids], dtype=np.intp)
        mask = np.ones(len(dataset), dtype=bool)
        mask[test_idx] = False
        train_idx = np.flatnonzero(mask)
        fold_cfg = replace(config, seed=tuple(list(_seed_tuple(seed)) + [_TAG_CV, f]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            scores = predictor(X[train_idx], Y[train_idx], X[test_idx], fold_cfg)
            rep = classification_report(scores >= threshold, Y[test_idx] > 0.5, scores=scores)
        pooled[test_idx] = scores
        if rep.macro_auc is None:
            warnings.warn(
                f"fold {f} has single-class truth everywhere; skipped from macro-AUC",
                stacklevel=2,
            )
        reports.append(rep)
    snapshot = config_snapshot_text(config, task=task, k=k, seed=seed)
    report = aggregate_reports(reports, snapshot, time.perf_counter() - t0, task)
    if collect_scores:
        return report, pooled, Y > 0.5
    return report


def subset_experiment(dataset: Dataset, features: embed.FeatureMatrix,
                      sizes=(50, 100, 200), config: CascadeConfig = CascadeConfig(),
                      *, seed: int = 0, k: int = 5,
                      max_retries: int = 1000) -> dict[int, ExperimentReport]:
    """5-fold CV on random subsets whose every label keeps both classes.

    Sampling retries (bounded) until each activity label has at least one
    positive and one negative row inside the subset; an impossible size
    raises naming the failing label.
    """
    Y = task_labels(dataset, TASK_MULTILABEL) > 0.5
    n, l = Y.shape
    names = dataset.label_names
    reports: dict[int, ExperimentReport] = {}
    for size in sizes:
        if size > n:
            raise DataError(f"subset size {size} exceeds dataset size {n}")
        for j in range(l):
            pos = int(Y[:, j].sum())
            if pos == 0 or pos == n:
                raise DataError(
                    f"label {names[j]!r} cannot have both classes in any subset"
                )
        rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_SUBSET, size]))
        chosen = None
        fail_counts = np.zeros(l, dtype=int)
        for _ in range(max_retries):
            pick = rng.choice(n, size=size, replace=False)
            pos = Y[pick].sum(axis=0)
            bad = (pos == 0) | (pos == size)
            if not bad.any():
                chosen = np.sort(pick)
                break
            fail_counts += bad
        if chosen is None:
            worst = int(np.argmax(fail_counts))
            raise DataError(
                f"could not cover label {names[worst]!r} with both classes in "
                f"{max_retries} draws of size {size}"
            )
        sub = Dataset(tuple(dataset.sequences[i] for i in chosen),
                      dataset.label_names, dataset.provenance)
        reports[size] = cross_validate(
            sub, features, config, task=TASK_MULTILABEL, k=k, seed=seed
        )
    return reports


def ablation_run(dataset: Dataset, features: embed.FeatureMatrix | None,
                 variant: str, config: CascadeConfig = CascadeConfig(), *,
                 task: str = TASK_MULTILABEL, k: int = 5, seed: int = 0,
                 one_hot_max_len: int = embed.DEFAULT_ONE_HOT_MAX_LEN) -> ExperimentReport:
    """Run one ablation variant; all variants share the fold plan per seed.

    hmd: embeddings + cascade. deep-forest-onehot: one-hot + cascade.
    random-forest-embed: embeddings + a single random forest (no cascade).
    """
    if variant in (VARIANT_HMD, VARIANT_RF):
        if features is None:
            raise DataError(f"variant {variant!r} needs an embedding matrix")
        feats = features
    elif variant == VARIANT_ONEHOT:
        feats = embed.one_hot_matrix(dataset, one_hot_max_len)
    else:
        raise ValueError(f"unknown ablation variant {variant!r}")
    predictor = _fit_predict_forest if variant == VARIANT_RF else _fit_predict_cascade
    return cross_validate(
        dataset, feats, config, task=task, k=k, seed=seed, predictor=predictor
    )


def config_snapshot_text(config: CascadeConfig, **extra) -> str:
    """Flat key=value snapshot of a run configuration."""
    pairs = {
        "n_trees": config.n_trees,
        "max_layers": config.max_layers,
        "patience": config.patience,
        "k_inner": config.k_inner,
        "seed": config.seed,
        "scan": config.scan,
        "window": config.window,
        "stride": config.stride,
        "scan_trees": config.scan_trees,
        "min_samples_leaf": config.min_samples_leaf,
        "max_depth": config.max_depth,
        "threads": config.threads,
    }
    pairs.update(extra)
    return "\n".join(f"{k}={v}" for k, v in pairs.items()) + "\n"


def report_tsv(report: ExperimentReport) -> str:
    """Per-fold metric rows plus mean/std rows; config embedded as comments.

    Wall-clock stays out of the file so identical runs stay byte-identical.
    """
    lines = [f"# {ln}" for ln in report.config_snapshot.strip().splitlines()]
    keys = sorted(report.means)
    lines.append("fold\t" + "\t".join(keys))
    for i, rep in enumerate(report.fold_reports):
        vals = rep.scalars()
        lines.append(
            f"{i}\t" + "\t".join(repr(vals[k]) if k in vals else "" for k in keys)
        )
    lines.append("mean\t" + "\t".join(repr(report.means[k]) for k in keys))
    lines.append("std\t" + "\t".join(repr(report.stds[k]) for k in keys))
    return "\n".join(lines) + "\n"


def report_summary(report: ExperimentReport) -> str:
    """Human-readable block for terminal output."""
    lines = [f"task: {report.task}   folds: {len(report.fold_reports)}"]
    for key in sorted(report.means):
        lines.append(f"  {key}: {report.means[key]:.4f} +/- {report.stds[key]:.4f}")
    lines.append(f"  wall-clock: {report.wall_clock:.1f}s")
    return "\n".join(lines) + "\n"


def per_label_means(report: ExperimentReport) -> MetricsReport:
    """Fold-averaged per-label report (AUC means skip degenerate folds)."""
    reps = report.fold_reports
    prec = np.mean([r.per_label_precision for r in reps], axis=0)
    rec = np.mean([r.per_label_recall for r in reps], axis=0)
    support = np.sum([r.support for r in reps], axis=0)
    auc = None
    if any(r.per_label_auc is not None for r in reps):
        cols = np.array([r.per_label_auc for r in reps if r.per_label_auc is not None])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            auc = tuple(float(v) for v in np.nanmean(cols, axis=0))
    return MetricsReport(
        subset_accuracy=report.means.get("subset_accuracy", 0.0),
        labelwise_accuracy=report.means.get("labelwise_accuracy", 0.0),
        macro_precision=report.means.get("macro_precision", 0.0),
        macro_recall=report.means.get("macro_recall", 0.0),
        macro_f1=report.means.get("macro_f1", 0.0),
        macro_auc=report.means.get("macro_auc"),
        per_label_precision=tuple(float(v) for v in prec),
        per_label_recall=tuple(float(v) for v in rec),
        per_label_auc=auc,
        support=tuple(int(v) for v in support),
    )
