"""Multi-label decision trees and forests built on flat numpy node tables.

Two modes: "random" draws sqrt(d) candidate features per node and takes the
best multi-label Gini split; "completely-random" draws one uniform feature
and a uniform threshold inside its observed range. Leaves hold the exact
label fractions of their training rows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .parallel import pmap

MODE_RANDOM = "random"
MODE_COMPLETELY_RANDOM = "completely-random"

# entropy tags keep seed streams for distinct purposes disjoint
_TAG_TREE = 0x7265
_TAG_FOLD = 0x666C


def multi_label_gini(p) -> float:
    """Sum over labels of 2*p_k*(1-p_k); 0 iff every p_k is 0 or 1."""
    p = np.asarray(p, dtype=np.float64)
    return float(np.sum(2.0 * p * (1.0 - p)))


@dataclass(frozen=True)
class Tree:
    """Flat node table; feature == -1 marks a leaf.

    dist rows are the exact label fractions of the training rows routed to
    each leaf (zeros on internal nodes); n_node_samples counts those rows.
    """

    feature: np.ndarray      # (m,) int32, -1 for leaves
    threshold: np.ndarray    # (m,) float64
    left: np.ndarray         # (m,) int32
    right: np.ndarray        # (m,) int32
    n_node_samples: np.ndarray  # (m,) int64
    dist: np.ndarray         # (m, l) float64

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


@dataclass(frozen=True)
class ForestModel:
    mode: str
    trees: tuple[Tree, ...]
    n_trees: int
    d: int
    l: int
    seed: tuple[int, ...]


@dataclass(frozen=True)
class ForestConfig:
    mode: str = MODE_RANDOM
    n_trees: int = 1000
    min_samples_leaf: int | None = None  # None -> 2 for random, 1 for completely-random
    max_depth: int | None = None
    seed: int | tuple[int, ...] = 0
    threads: int = 1

    def resolved_min_samples_leaf(self) -> int:
        if self.min_samples_leaf is not None:
            return self.min_samples_leaf
        return 2 if self.mode == MODE_RANDOM else 1


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


_ARANGE = np.arange(1024)


def _arange(n: int) -> np.ndarray:
    global _ARANGE
    if n > _ARANGE.shape[0]:
        _ARANGE = np.arange(max(n, 2 * _ARANGE.shape[0]))
    return _ARANGE[:n]


def _node_split(X, Y, idx, ysum, cand, msl):
    """Best split over candidate features for the rows `idx`.

    Returns (feature, threshold, idx_left, idx_right, sum_left, weighted
    child Gini sum) or None when no candidate admits a valid split. Ties
    break toward the lower feature index, then the lower threshold (cand
    must be sorted ascending).
    """
    n = idx.shape[0]
    Xc = X[idx[:, None], cand]                 # (n, c)
    order = Xc.argsort(axis=0)
    car = _arange(len(cand))
    Xs = Xc[order, car]
    valid = Xs[1:] > Xs[:-1]                   # (n-1, c)
    if msl > 1:
        cnt = _arange(n)[1:]
        valid &= ((cnt >= msl) & (n - cnt >= msl))[:, None]
    if not valid.any():
        return None
    cum = Y[idx][order].cumsum(axis=0)         # (n, c, l)
    body = cum[:-1]
    cnt_l = np.arange(1, n, dtype=np.float64)[:, None]
    s2_l = np.einsum("ijk,ijk->ij", body, body)
    rest = ysum[None, None, :] - body
    s2_r = np.einsum("ijk,ijk->ij", rest, rest)
    # maximizing key minimizes the sample-weighted child Gini sum
    key = s2_l / cnt_l + s2_r / (n - cnt_l)
    key[~valid] = -np.inf
    pos = int(key.T.ravel().argmax())
    col, row = divmod(pos, n - 1)
    best = key[row, col]
    if not np.isfinite(best):
        return None
    thr = 0.5 * (Xs[row, col] + Xs[row + 1, col])
    srt = idx[order[:, col]]
    weighted = 2.0 * (float(ysum.sum()) - float(best)) / n
    return int(cand[col]), float(thr), srt[: row + 1], srt[row + 1 :], cum[row, col], weighted


def best_split(rows, labels, candidate_features, min_samples_leaf: int = 1):
    """Best (feature, threshold, impurity decrease) over candidate features.

    Thresholds are midpoints between consecutive distinct sorted values; the
    split minimizing the sample-weighted child Gini sum wins. Returns None
    when every candidate is constant (leaf signal).
    """
    X = np.ascontiguousarray(rows, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] < 2:
        raise ValueError("best_split needs at least 2 rows")
    cand = np.sort(np.asarray(candidate_features, dtype=np.intp))
    if cand.size == 0:
        raise ValueError("candidate feature set is empty")
    ysum = Y.sum(axis=0)
    found = _node_split(X, Y, np.arange(X.shape[0]), ysum, cand, min_samples_leaf)
    if found is None:
        return None
    feat, thr, _, _, _, weighted = found
    parent = multi_label_gini(ysum / X.shape[0])
    return feat, thr, parent - weighted


def _cr_split(X, Y, idx, ysum, rng, msl):
    """Completely-random split: uniform feature among non-constant ones,
    uniform threshold inside its observed range."""
    d = X.shape[1]
    # one uniform draw first; the permutation fallback only runs when that
    # column is constant, which by symmetry keeps the chosen feature uniform
    # over the non-constant ones
    f = int(rng.integers(d))
    col = X[idx, f]
    lo = col.min()
    hi = col.max()
    if hi <= lo:
        for g in rng.permutation(d):
            col = X[idx, g]
            lo = col.min()
            hi = col.max()
            if hi > lo:
                f = int(g)
                break
        else:
            return None
    thr = float(rng.uniform(lo, hi))
    # keep the threshold strictly below the max so both sides are non-empty
    thr = min(max(thr, float(lo)), float(np.nextafter(hi, lo)))
    go_left = col <= thr
    n_l = int(go_left.sum())
    if msl > 1 and (n_l < msl or idx.shape[0] - n_l < msl):
        return None
    idx_l = idx[go_left]
    sum_l = Y[idx_l].sum(axis=0)
    return f, thr, idx_l, idx[~go_left], sum_l, 0.0


@dataclass(frozen=True)
class TreeConfig:
    mode: str = MODE_RANDOM
    min_samples_leaf: int = 2
    max_depth: int | None = None


def train_tree(rows, labels, config: TreeConfig, rng: np.random.Generator) -> Tree:
    """Grow one tree; stops on purity (Gini 0), min_samples_leaf, or max_depth."""
    X = np.ascontiguousarray(rows, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] < 1:
        raise ValueError("train_tree needs at least one row")
    return _grow_tree(X, Y, np.arange(X.shape[0]), config, rng)


def _grow_tree(X, Y, base_idx, config: TreeConfig, rng) -> Tree:
    d = X.shape[1]
    l = Y.shape[1]
    msl = config.min_samples_leaf
    max_depth = config.max_depth
    random_mode = config.mode == MODE_RANDOM
    n_cand = max(1, math.isqrt(d))

    feature: list[int] = [-1]
    threshold: list[float] = [0.0]
    left: list[int] = [-1]
    right: list[int] = [-1]
    counts: list[int] = [0]
    leaf_rows: list[tuple[int, np.ndarray]] = []

    stack = [(base_idx, Y[base_idx].sum(axis=0), 0, 0)]
    while stack:
        idx, ysum, depth, slot = stack.pop()
        n = idx.shape[0]
        counts[slot] = n
        split = None
        if (
            n >= 2
            and n >= 2 * msl
            and (max_depth is None or depth < max_depth)
            and bool(np.any((ysum > 0.0) & (ysum < n)))  # not pure
        ):
            if random_mode:
                cand = np.sort(rng.choice(d, size=n_cand, replace=False))
                split = _node_split(X, Y, idx, ysum, cand, msl)
            else:
                split = _cr_split(X, Y, idx, ysum, rng, msl)
        if split is None:
            leaf_rows.append((slot, ysum / n))
            continue
        feat, thr, idx_l, idx_r, sum_l, _ = split
        feature[slot] = feat
        threshold[slot] = thr
        slot_l = len(feature)
        slot_r = slot_l + 1
        left[slot] = slot_l
        right[slot] = slot_r
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(0)
        stack.append((idx_r, ysum - sum_l, depth + 1, slot_r))
        stack.append((idx_l, sum_l, depth + 1, slot_l))

    dist = np.zeros((len(feature), l), dtype=np.float64)
    for slot, frac in leaf_rows:
        dist[slot] = frac
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        n_node_samples=np.asarray(counts, dtype=np.int64),
        dist=dist,
    )


def _fit_chunk(X, Y, tree_cfg, seed, lo, hi, bootstrap):
    """Train trees lo..hi (per-tree seeds spawned from the forest seed)."""
    children = np.random.SeedSequence(list(seed) + [_TAG_TREE]).spawn(hi)[lo:]
    n = X.shape[0]
    base = np.arange(n)
    out = []
    for ss in children:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=n) if bootstrap else base
        out.append(_grow_tree(X, Y, idx, tree_cfg, rng))
    return out


def train_forest(rows, labels, config: ForestConfig) -> ForestModel:
    """Train a forest; random mode bootstraps per tree, completely-random
    mode uses the full sample. Per-tree seeds derive from the forest seed, so
    results are identical regardless of worker schedule."""
    X = np.ascontiguousarray(rows, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] < 1:
        raise ValueError("train_forest needs at least one row")
    seed = _seed_tuple(config.seed)
    tree_cfg = TreeConfig(
        mode=config.mode,
        min_samples_leaf=config.resolved_min_samples_leaf(),
        max_depth=config.max_depth,
    )
    bootstrap = config.mode == MODE_RANDOM
    workers = max(1, config.threads)
    nt = config.n_trees
    if workers == 1 or nt < 4:
        trees = _fit_chunk(X, Y, tree_cfg, seed, 0, nt, bootstrap)
    else:
        bounds = np.linspace(0, nt, workers + 1).astype(int)
        tasks = [
            (X, Y, tree_cfg, seed, int(lo), int(hi), bootstrap)
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        trees = [t for chunk in pmap(_fit_chunk, tasks, workers) for t in chunk]
    return ForestModel(config.mode, tuple(trees), nt, X.shape[1], Y.shape[1], seed)


def _apply_tree(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf index reached by every row of X."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    feat = tree.feature
    active = np.flatnonzero(feat[node] >= 0)
    while active.size:
        cur = node[active]
        f = feat[cur]
        go_left = X[active, f] <= tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
        active = active[feat[node[active]] >= 0]
    return node


def predict_forest_batch(model: ForestModel, rows) -> np.ndarray:
    """Mean of leaf label distributions over all trees; shape (n, l)."""
    X = np.ascontiguousarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.d:
        raise ValueError(f"expected {model.d} features, got {X.shape[1]}")
    acc = np.zeros((X.shape[0], model.l), dtype=np.float64)
    for tree in model.trees:
        acc += tree.dist[_apply_tree(tree, X)]
    return acc / len(model.trees)


def predict_forest(model: ForestModel, vector) -> np.ndarray:
    """Label distribution for one feature vector."""
    return predict_forest_batch(model, np.asarray(vector, dtype=np.float64)[None, :])[0]


def fold_assignment(n: int, k: int, seed) -> np.ndarray:
    """Deterministic fold id per row (0..k-1) from a seeded permutation."""
    rng = np.random.default_rng(np.random.SeedSequence(list(_seed_tuple(seed)) + [_TAG_FOLD]))
    perm = rng.permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(perm, k)):
        folds[chunk] = f
    return folds


def out_of_fold_predict(rows, labels, config: ForestConfig, k_inner: int,
                        fold_seed=None) -> np.ndarray:
    """n x l matrix where row i is predicted by a forest trained without
    fold(i). Fold assignment is deterministic given the seed."""
    X = np.ascontiguousarray(rows, dtype=np.float64)
    Y = np.asarray(labels, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    if k_inner < 2:
        raise ValueError("k_inner must be >= 2")
    if n < k_inner:
        raise ValueError(f"need at least k_inner={k_inner} rows, got {n}")
    pos = Y.sum(axis=0)
    weak = np.flatnonzero(pos < k_inner)
    if weak.size:
        warnings.warn(
            f"labels {weak.tolist()} have fewer than {k_inner} positive rows; "
            "out-of-fold estimates for them will be unstable",
            stacklevel=2,
        )
    seed = _seed_tuple(fold_seed if fold_seed is not None else config.seed)
    folds = fold_assignment(n, k_inner, seed)
    out = np.zeros((n, Y.shape[1]), dtype=np.float64)
    for f in range(k_inner):
        test = folds == f
        train = ~test
        sub_cfg = replace(config, seed=tuple(list(seed) + [f + 1]))
        model = train_forest(X[train], Y[train], sub_cfg)
        out[test] = predict_forest_batch(model, X[test])
    return out
