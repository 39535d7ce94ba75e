"""Multi-grained scanning and the measure-aware cascade forest.

Each cascade level holds a quartet of forests (2 random + 2 completely
random). Levels grow while the training macro-AUC (computed on out-of-fold
class vectors) keeps improving, with patience-based early stopping and the
best layer recorded. Per label, a level whose confidence falls below the
best seen so far reuses the previous level's class-vector slice.

Single-label tasks emit two-class vectors [1-p, p] wherever class vectors
are concatenated, so a binary scan of a 1280-dim input with window 100 and
stride 1 yields 1181 * 2 * 4 = 9448 transformed features.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .forest import (
    MODE_COMPLETELY_RANDOM,
    MODE_RANDOM,
    ForestConfig,
    ForestModel,
    _seed_tuple,
    out_of_fold_predict,
    predict_forest_batch,
    train_forest,
)
from .metrics import ScoredLabelSet, macro_auc

QUARTET_MODES = (MODE_RANDOM, MODE_RANDOM, MODE_COMPLETELY_RANDOM, MODE_COMPLETELY_RANDOM)

REASON_PATIENCE = "patience"
REASON_MAX_LAYERS = "max-layers"

# seed-entropy tags
_TAG_SCAN = 0x5C
_TAG_LEVEL = 0x1E
_TAG_FOLDS = 0xF0


def class_vector_width(l: int) -> int:
    """Width of one forest's emitted class vector: 2 for single-label tasks."""
    return 2 if l == 1 else l


def to_class_vectors(probs: np.ndarray) -> np.ndarray:
    """(n, l) label probabilities -> (n, cv) class vectors."""
    if probs.shape[1] == 1:
        return np.hstack([1.0 - probs, probs])
    return probs


def label_column_indices(l: int, n_forests: int = 4) -> list[np.ndarray]:
    """Block columns belonging to each label, forest-major block layout."""
    cv = class_vector_width(l)
    cols = []
    for j in range(l):
        offsets = [0, 1] if l == 1 else [j]
        cols.append(
            np.array([f * cv + o for f in range(n_forests) for o in offsets], dtype=np.intp)
        )
    return cols


def scan_windows(vector, w: int, s: int = 1) -> np.ndarray:
    """Contiguous windows of length w at stride s, left to right."""
    v = np.asarray(vector, dtype=np.float64)
    d = v.shape[-1]
    if w > d:
        raise ValueError(f"window {w} exceeds input dimension {d}")
    if s < 1:
        raise ValueError("stride must be >= 1")
    starts = range(0, d - w + 1, s)
    return np.stack([v[..., i : i + w] for i in starts], axis=-2)


def n_windows(d: int, w: int, s: int) -> int:
    return (d - w) // s + 1


@dataclass(frozen=True)
class ScanningModel:
    """Sliding-window forest quartet; transform emits window-major,
    forest-major class vectors."""

    window: int
    stride: int
    forests: tuple[ForestModel, ...]
    d: int
    l: int

    @property
    def output_dim(self) -> int:
        return n_windows(self.d, self.window, self.stride) * class_vector_width(self.l) * 4


def _window_instances(X: np.ndarray, w: int, s: int) -> np.ndarray:
    """(n, d) -> (n * n_windows, w) pooled window instances."""
    from numpy.lib.stride_tricks import sliding_window_view

    views = sliding_window_view(X, w, axis=1)[:, ::s, :]
    return np.ascontiguousarray(views).reshape(-1, w)


def train_scanner(rows, labels, window: int, stride: int = 1,
                  n_trees: int = 100, seed=0, threads: int = 1) -> ScanningModel:
    """Fit the scanning quartet on pooled window instances; every window
    inherits its parent row's full label vector."""
    X = np.ascontiguousarray(rows, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    d = X.shape[1]
    if window > d:
        raise ValueError(f"window {window} exceeds input dimension {d}")
    inst = _window_instances(X, window, stride)
    k = n_windows(d, window, stride)
    inst_labels = np.repeat(Y, k, axis=0)
    seed_t = list(_seed_tuple(seed))
    forests = tuple(
        train_forest(
            inst,
            inst_labels,
            ForestConfig(mode=mode, n_trees=n_trees,
                         seed=tuple(seed_t + [_TAG_SCAN, i]), threads=threads),
        )
        for i, mode in enumerate(QUARTET_MODES)
    )
    return ScanningModel(window, stride, forests, d, Y.shape[1])


def transform(scanner: ScanningModel, rows) -> np.ndarray:
    """Concatenated class vectors for each window, forests in fixed order."""
    X = np.asarray(rows, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != scanner.d:
        raise ValueError(f"expected {scanner.d} features, got {X.shape[1]}")
    inst = _window_instances(X, scanner.window, scanner.stride)
    k = n_windows(scanner.d, scanner.window, scanner.stride)
    cv = class_vector_width(scanner.l)
    parts = []
    for f in scanner.forests:
        probs = to_class_vectors(predict_forest_batch(f, inst))
        parts.append(probs.reshape(X.shape[0], k, cv))
    out = np.concatenate(parts, axis=2).reshape(X.shape[0], k * 4 * cv)
    return out[0] if single else out


def level_input(original_features, prev_class_vectors=None) -> np.ndarray:
    """Level input: original features followed by the previous level's
    reused class-vector block (if any)."""
    X = np.asarray(original_features, dtype=np.float64)
    if prev_class_vectors is None:
        return X
    G = np.asarray(prev_class_vectors, dtype=np.float64)
    if X.ndim != G.ndim or (X.ndim == 2 and X.shape[0] != G.shape[0]):
        raise ValueError(f"misaligned inputs: {X.shape} vs {G.shape}")
    return np.concatenate([X, G], axis=-1)


def label_confidence(prob_column, log: bool = False) -> float:
    """Confidence of one label over a set of instance probabilities.

    Probabilities are sorted descending, then the sum over i of
    (prod of the first i) * (prod of one-minus the rest) is evaluated in
    log space with stable summation. Result lies in (0, m+1]; with log=True
    the log of that value is returned instead (useful for comparisons at
    large m, where the plain value underflows).
    """
    p = np.sort(np.clip(np.asarray(prob_column, dtype=np.float64), 0.0, 1.0))[::-1]
    with np.errstate(divide="ignore"):
        lp = np.log(p)
        lq = np.log1p(-p)
    prefix = np.concatenate([[0.0], np.cumsum(lp)])          # sum of log p over k <= i
    suffix = np.concatenate([np.cumsum(lq[::-1])[::-1], [0.0]])  # over k > i
    terms = prefix + suffix
    peak = np.max(terms)
    if not np.isfinite(peak):
        # every term vanished, which cannot happen for p in [0,1]; guard anyway
        return -np.inf if log else 0.0
    log_value = float(peak + np.log(np.sum(np.exp(terms - peak))))
    return log_value if log else float(np.exp(log_value))


def feature_reuse(current_repr, prev_repr, current_conf, thresholds, l: int):
    """Per label, take the previous level's class-vector slice when the
    current confidence falls below the threshold.

    Returns (representation, reuse mask); the mask records the per-label
    choice for prediction time.
    """
    cur = np.asarray(current_repr, dtype=np.float64)
    prev = np.asarray(prev_repr, dtype=np.float64)
    if cur.shape != prev.shape:
        raise ValueError(f"representation shapes differ: {cur.shape} vs {prev.shape}")
    conf = np.asarray(current_conf, dtype=np.float64)
    thr = np.asarray(thresholds, dtype=np.float64)
    mask = conf < thr
    out = cur.copy()
    for j, cols in enumerate(label_column_indices(l)):
        if mask[j]:
            out[..., cols] = prev[..., cols]
    return out, mask


class GrowthController:
    """Patience / max-layer stopping with first-argmax best-layer tracking."""

    def __init__(self, max_layers: int = 20, patience: int = 3):
        if max_layers < 1 or patience < 1:
            raise ValueError("max_layers and patience must be >= 1")
        self.max_layers = max_layers
        self.patience = patience
        self.history: list[float] = []
        self.best_index = 0       # 1-based once a level is recorded
        self.best_value = -np.inf
        self.stop_reason: str | None = None

    def update(self, measure: float) -> bool:
        """Record one level's measure; returns True while growth continues."""
        if self.stop_reason is not None:
            raise RuntimeError("controller already stopped")
        self.history.append(float(measure))
        t = len(self.history)
        if measure > self.best_value:
            self.best_value = float(measure)
            self.best_index = t
        if t >= self.max_layers:
            self.stop_reason = REASON_MAX_LAYERS
            return False
        if t - self.best_index >= self.patience:
            self.stop_reason = REASON_PATIENCE
            return False
        return True


@dataclass(frozen=True)
class CascadeLevel:
    forests: tuple[ForestModel, ...]   # RF1, RF2, CRF1, CRF2
    confidences: tuple[float, ...]     # recorded post-reuse per-label confidence (log domain)
    reuse_mask: tuple[bool, ...]       # True where the previous slice was kept
    index: int                         # 1-based


@dataclass(frozen=True)
class CascadeConfig:
    n_trees: int = 1000
    max_layers: int = 20
    patience: int = 3
    k_inner: int = 3
    seed: int | tuple[int, ...] = 0
    scan: bool = False
    window: int = 100
    stride: int = 1
    scan_trees: int = 100
    min_samples_leaf: int | None = None
    max_depth: int | None = None
    threads: int = 1


@dataclass(frozen=True)
class CascadeModel:
    levels: tuple[CascadeLevel, ...]
    best_layer_index: int              # 1-based
    history: tuple[float, ...]
    stop_reason: str
    input_dim: int                     # dim seen by level 1 (post-scan)
    raw_dim: int                       # dim before scanning
    l: int
    scanner: ScanningModel | None
    config: CascadeConfig
    measure: str = "macro-auc"

    @property
    def n_levels(self) -> int:
        return len(self.levels)


def _quartet_config(base: CascadeConfig, mode: str, entropy: list[int]) -> ForestConfig:
    return ForestConfig(
        mode=mode,
        n_trees=base.n_trees,
        min_samples_leaf=base.min_samples_leaf,
        max_depth=base.max_depth,
        seed=tuple(entropy),
        threads=base.threads,
    )


def _level_measure(probs: np.ndarray, Y: np.ndarray) -> float:
    # degenerate labels warn here (excluded from the measure by macro_auc)
    return macro_auc(ScoredLabelSet(probs, Y.astype(bool)))


def train_cascade(features, labels, config: CascadeConfig = CascadeConfig()) -> CascadeModel:
    """Grow the cascade level by level on out-of-fold class vectors.

    Degenerate labels are excluded from the growth measure by macro_auc
    (with a warning). Stops at max_layers or after `patience` levels without
    improvement; the best layer is the first argmax of the history.
    """
    X_raw = np.ascontiguousarray(features, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, l = Y.shape
    if X_raw.shape[0] != n:
        raise ValueError("features and labels are misaligned")
    if n < config.k_inner:
        raise ValueError(f"need at least k_inner={config.k_inner} rows")
    seed_t = list(_seed_tuple(config.seed))

    scanner = None
    X = X_raw
    if config.scan:
        scanner = train_scanner(
            X_raw, Y, config.window, config.stride,
            n_trees=config.scan_trees, seed=tuple(seed_t), threads=config.threads,
        )
        X = transform(scanner, X_raw)

    controller = GrowthController(config.max_layers, config.patience)
    levels: list[CascadeLevel] = []
    block_prev: np.ndarray | None = None   # post-reuse OOF class-vector block
    probs_prev: np.ndarray | None = None   # post-reuse per-label OOF probabilities
    recorded_prev: np.ndarray | None = None
    best_conf = np.full(l, -np.inf)

    t = 0
    while True:
        t += 1
        A = level_input(X, block_prev)
        forests = []
        oof = []
        for i, mode in enumerate(QUARTET_MODES):
            fc = _quartet_config(config, mode, seed_t + [_TAG_LEVEL, t, i])
            forests.append(train_forest(A, Y, fc))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                oof.append(
                    out_of_fold_predict(
                        A, Y, fc, config.k_inner,
                        fold_seed=tuple(seed_t + [_TAG_FOLDS, t]),
                    )
                )
        block_cur = np.hstack([to_class_vectors(o) for o in oof])
        probs_cur = np.mean(oof, axis=0)
        # log-domain confidences: same ordering, no underflow at large n
        conf_cur = np.array(
            [label_confidence(probs_cur[:, j], log=True) for j in range(l)]
        )

        if block_prev is None:
            block_post, probs_post = block_cur, probs_cur
            mask = np.zeros(l, dtype=bool)
            recorded = conf_cur
        else:
            block_post, mask = feature_reuse(block_cur, block_prev, conf_cur, best_conf, l)
            probs_post = probs_cur.copy()
            probs_post[:, mask] = probs_prev[:, mask]
            recorded = np.where(mask, recorded_prev, conf_cur)
        best_conf = np.maximum(best_conf, conf_cur)

        levels.append(
            CascadeLevel(
                forests=tuple(forests),
                confidences=tuple(float(c) for c in recorded),
                reuse_mask=tuple(bool(b) for b in mask),
                index=t,
            )
        )
        measure = _level_measure(probs_post, Y)
        keep_going = controller.update(measure)
        block_prev, probs_prev, recorded_prev = block_post, probs_post, recorded
        if not keep_going:
            break

    return CascadeModel(
        levels=tuple(levels),
        best_layer_index=controller.best_index,
        history=tuple(controller.history),
        stop_reason=controller.stop_reason or REASON_MAX_LAYERS,
        input_dim=X.shape[1],
        raw_dim=X_raw.shape[1],
        l=l,
        scanner=scanner,
        config=config,
    )


def predict_cascade_batch(model: CascadeModel, rows) -> np.ndarray:
    """Run levels 1..best_layer_index with full-forest predictions and the
    stored reuse choices; returns (n, l) label probabilities."""
    X = np.asarray(rows, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.raw_dim:
        raise ValueError(f"expected {model.raw_dim} features, got {X.shape[1]}")
    if model.scanner is not None:
        X = transform(model.scanner, X)
    cols = label_column_indices(model.l)
    block_prev = None
    probs_prev = None
    for level in model.levels[: model.best_layer_index]:
        A = level_input(X, block_prev)
        per_forest = [predict_forest_batch(f, A) for f in level.forests]
        block = np.hstack([to_class_vectors(p) for p in per_forest])
        probs = np.mean(per_forest, axis=0)
        if block_prev is not None:
            for j, reused in enumerate(level.reuse_mask):
                if reused:
                    block[:, cols[j]] = block_prev[:, cols[j]]
                    probs[:, j] = probs_prev[:, j]
        block_prev, probs_prev = block, probs
    assert probs_prev is not None
    return probs_prev[0] if single else probs_prev


def predict_cascade(model: CascadeModel, vector) -> np.ndarray:
    """Label distribution for a single vector."""
    return predict_cascade_batch(model, np.asarray(vector))


def history_tsv(model: CascadeModel) -> str:
    """Measure history as TSV: level, macro-AUC, stopped-reason."""
    lines = ["level\tmacro_auc\tstopped_reason"]
    for i, v in enumerate(model.history, start=1):
        reason = model.stop_reason if i == len(model.history) else ""
        lines.append(f"{i}\t{v!r}\t{reason}")
    return "\n".join(lines) + "\n"
