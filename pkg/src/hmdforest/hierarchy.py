"""Two-level prediction pipeline: a binary gate cascade over all sequences,
then an 11-label activity cascade applied to predicted positives only."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import embed
from .cascade import CascadeConfig, CascadeModel, predict_cascade_batch, train_cascade
from .errors import DataError
from .forest import _seed_tuple
from .seqio import ACTIVITY_LABELS, Dataset

_TAG_BINARY = 0xB1
_TAG_MULTI = 0xB2


@dataclass(frozen=True)
class PipelineModel:
    binary: CascadeModel            # l = 1, positive-class probability
    multilabel: CascadeModel        # l = 11
    tau_binary: float
    tau_labels: tuple[float, ...]
    label_names: tuple[str, ...]
    feature_source: str

    def __post_init__(self):
        # 1.0 is allowed as the "never annotate" boundary
        if not 0.0 < self.tau_binary <= 1.0:
            raise ValueError("tau_binary must lie in (0, 1]")
        if len(self.tau_labels) != len(self.label_names):
            raise ValueError("one threshold per activity label required")
        if any(not 0.0 < t <= 1.0 for t in self.tau_labels):
            raise ValueError("label thresholds must lie in (0, 1]")
        if self.binary.raw_dim != self.multilabel.raw_dim:
            raise ValueError("stage feature dimensionalities differ")


@dataclass(frozen=True)
class Verdict:
    """Per-sequence outcome; activity fields are present iff is_amp."""

    id: str
    is_amp: bool
    amp_score: float
    activity_scores: tuple[float, ...] | None = None
    activity_labels: tuple[bool, ...] | None = None

    def __post_init__(self):
        has_activity = self.activity_scores is not None
        if has_activity != self.is_amp or (self.activity_labels is not None) != self.is_amp:
            raise ValueError("activity fields must be present exactly when is_amp")


def train_pipeline(
    full_dataset: Dataset,
    positive_dataset: Dataset,
    features: embed.FeatureMatrix,
    config: CascadeConfig = CascadeConfig(),
    tau_binary: float = 0.5,
    tau_labels=None,
) -> PipelineModel:
    """Fit the binary cascade on every record and the multi-label cascade on
    the positive records only."""
    amp_by_id = {}
    for seq in full_dataset:
        if seq.amp_label is None:
            raise DataError(f"record {seq.id!r} lacks an AMP label")
        amp_by_id[seq.id] = seq.amp_label
    for seq in positive_dataset:
        if amp_by_id.get(seq.id) is False:
            raise DataError(
                f"positive dataset record {seq.id!r} is labeled non-AMP in the full dataset"
            )
        if seq.activity_labels is None:
            raise DataError(f"positive record {seq.id!r} lacks activity labels")

    X_full = embed.join(full_dataset, features)
    y_amp = np.array([[1.0 if s.amp_label else 0.0] for s in full_dataset])
    X_pos = embed.join(positive_dataset, features)
    Y_act = np.array(
        [[1.0 if b else 0.0 for b in s.activity_labels] for s in positive_dataset]
    )

    seed_t = list(_seed_tuple(config.seed))
    binary = train_cascade(X_full, y_amp, replace(config, seed=tuple(seed_t + [_TAG_BINARY])))
    multilabel = train_cascade(X_pos, Y_act, replace(config, seed=tuple(seed_t + [_TAG_MULTI])))
    names = positive_dataset.label_names or ACTIVITY_LABELS
    taus = tuple(float(t) for t in (tau_labels if tau_labels is not None else [0.5] * len(names)))
    return PipelineModel(
        binary=binary,
        multilabel=multilabel,
        tau_binary=float(tau_binary),
        tau_labels=taus,
        label_names=tuple(names),
        feature_source=features.source,
    )


def predict_batch(pipeline: PipelineModel, ids, rows) -> list[Verdict]:
    """Gate each sequence at tau_binary; annotate activities only for AMPs."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    amp_scores = predict_cascade_batch(pipeline.binary, X)[:, 0]
    is_amp = amp_scores >= pipeline.tau_binary
    verdicts: list[Verdict] = [None] * X.shape[0]  # type: ignore[list-item]
    hits = np.flatnonzero(is_amp)
    if hits.size:
        act = predict_cascade_batch(pipeline.multilabel, X[hits])
        taus = np.asarray(pipeline.tau_labels)
        for row, i in enumerate(hits):
            scores = act[row]
            verdicts[i] = Verdict(
                id=ids[i],
                is_amp=True,
                amp_score=float(amp_scores[i]),
                activity_scores=tuple(float(s) for s in scores),
                activity_labels=tuple(bool(b) for b in scores >= taus),
            )
    for i in np.flatnonzero(~is_amp):
        verdicts[i] = Verdict(id=ids[i], is_amp=False, amp_score=float(amp_scores[i]))
    return verdicts


def predict(pipeline: PipelineModel, seq_id: str, vector) -> Verdict:
    """Verdict for a single sequence."""
    return predict_batch(pipeline, [seq_id], np.asarray(vector)[None, :])[0]


def rank_candidates(pipeline: PipelineModel, ids, rows):
    """Verdicts plus, per activity label, predicted AMPs ranked by descending
    score (ties broken by id)."""
    if len(ids) == 0:
        raise ValueError("rank_candidates needs a non-empty batch")
    verdicts = predict_batch(pipeline, ids, rows)
    rankings: dict[str, list[tuple[int, str, float]]] = {}
    amps = [v for v in verdicts if v.is_amp]
    for j, name in enumerate(pipeline.label_names):
        scored = sorted(
            ((v.id, v.activity_scores[j]) for v in amps),
            key=lambda item: (-item[1], item[0]),
        )
        rankings[name] = [(rank, rid, score) for rank, (rid, score) in enumerate(scored, start=1)]
    return verdicts, rankings


def verdicts_tsv(verdicts, label_names=ACTIVITY_LABELS) -> str:
    """Verdicts as TSV; activity cells stay empty for gated-out sequences."""
    head = ["id", "is_amp", "amp_score"]
    head += [f"score:{n}" for n in label_names]
    head += [f"label:{n}" for n in label_names]
    lines = ["\t".join(head)]
    for v in verdicts:
        row = [v.id, "1" if v.is_amp else "0", repr(v.amp_score)]
        if v.is_amp:
            row += [repr(s) for s in v.activity_scores]
            row += ["1" if b else "0" for b in v.activity_labels]
        else:
            row += [""] * (2 * len(label_names))
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def rankings_tsv(rankings) -> str:
    lines = ["label\trank\tid\tscore"]
    for name, rows in rankings.items():
        for rank, rid, score in rows:
            lines.append(f"{name}\t{rank}\t{rid}\t{score!r}")
    return "\n".join(lines) + "\n"
