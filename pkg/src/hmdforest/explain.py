"""Local-surrogate explanations and global feature weights.

An instance is explained by perturbing it with per-feature Gaussian noise
(training-set standard deviations), scoring the samples with the model, and
fitting a proximity-weighted ridge regression on standardized features. The
slope vector is the local explanation; global weights average local ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_N_SAMPLES = 1000
DEFAULT_RIDGE = 1e-3
DEFAULT_TOP_K = 48


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature mean and standard deviation from training data."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_matrix(cls, X) -> "FeatureStats":
        X = np.asarray(X, dtype=np.float64)
        return cls(X.mean(axis=0), X.std(axis=0))

    def safe_std(self) -> np.ndarray:
        # zero-variance features stay constant; 1.0 keeps divisions harmless
        return np.where(self.std > 0, self.std, 1.0)


@dataclass(frozen=True)
class LocalExplanation:
    instance_id: str
    weights: np.ndarray     # (d,)
    sigma: float
    n_samples: int


@dataclass(frozen=True)
class GlobalWeights:
    weights: np.ndarray     # (d,)
    n_instances: int


def default_sigma(d: int) -> float:
    return 0.75 * float(np.sqrt(d))


def perturb(instance, n_samples: int, stats: FeatureStats,
            rng: np.random.Generator, sigma: float | None = None):
    """Perturbed sample matrix plus proximity weights.

    Samples are drawn per feature from a normal law centered at the instance
    with the training stddev (zero-variance features stay constant); the
    weight is exp(-dist^2 / sigma^2) with dist the standardized Euclidean
    distance. The instance itself is row 0 with weight exactly 1.
    """
    x = np.asarray(instance, dtype=np.float64)
    d = x.shape[0]
    if sigma is None:
        sigma = default_sigma(d)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    std = np.where(stats.std > 0, stats.std, 0.0)
    noise = rng.normal(size=(n_samples - 1, d)) * std
    samples = np.vstack([x[None, :], x[None, :] + noise])
    diffs = (samples - x) / stats.safe_std()
    dist2 = np.einsum("ij,ij->i", diffs, diffs)
    weights = np.exp(-dist2 / (sigma * sigma))
    weights[0] = 1.0
    return samples, weights


def local_weights(score_fn, instance, stats: FeatureStats, *,
                  n_samples: int = DEFAULT_N_SAMPLES, sigma: float | None = None,
                  ridge: float = DEFAULT_RIDGE, seed=0,
                  instance_id: str = "") -> LocalExplanation:
    """Weighted ridge fit of model scores on standardized perturbed features.

    score_fn maps an (m, d) matrix to m real scores. Solved as a least-squares
    problem on the sqrt-weighted design with ridge rows on the slopes (the
    intercept is not penalized).
    """
    x = np.asarray(instance, dtype=np.float64)
    d = x.shape[0]
    if sigma is None:
        sigma = default_sigma(d)
    if ridge <= 0:
        raise ValueError("ridge damping must be positive")
    rng = np.random.default_rng(seed)
    samples, w = perturb(x, n_samples, stats, rng, sigma)
    y = np.asarray(score_fn(samples), dtype=np.float64).reshape(-1)
    if y.shape[0] != samples.shape[0]:
        raise ValueError("score_fn returned the wrong number of scores")
    Z = (samples - stats.mean) / stats.safe_std()
    A = np.hstack([np.ones((Z.shape[0], 1)), Z])
    sw = np.sqrt(w)[:, None]
    # ridge rows: sqrt(lambda) on each slope, none on the intercept
    damp = np.hstack([np.zeros((d, 1)), np.sqrt(ridge) * np.eye(d)])
    lhs = np.vstack([sw * A, damp])
    rhs = np.concatenate([sw[:, 0] * y, np.zeros(d)])
    beta, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return LocalExplanation(instance_id, beta[1:], float(sigma), n_samples)


def global_weights(score_fn, rows, stats: FeatureStats, *,
                   n_samples: int = DEFAULT_N_SAMPLES, sigma: float | None = None,
                   ridge: float = DEFAULT_RIDGE, seed=0) -> GlobalWeights:
    """Element-wise mean of local weight vectors over the sampled instances."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[0] == 0:
        raise ValueError("global_weights needs at least one instance")
    acc = np.zeros(X.shape[1])
    for i in range(X.shape[0]):
        exp = local_weights(
            score_fn, X[i], stats,
            n_samples=n_samples, sigma=sigma, ridge=ridge,
            seed=(int(seed), i), instance_id=str(i),
        )
        acc += exp.weights
    return GlobalWeights(acc / X.shape[0], X.shape[0])


def select_top_k(global_w: GlobalWeights, k: int = DEFAULT_TOP_K,
                 by_abs: bool = False) -> np.ndarray:
    """Indices of the k largest global weights, descending; ties broken by
    lower index. by_abs ranks by magnitude instead of signed value."""
    w = np.abs(global_w.weights) if by_abs else global_w.weights
    d = w.shape[0]
    if k <= 0:
        raise ValueError("k must be positive")
    if k > d:
        raise ValueError(f"k={k} exceeds feature count {d}")
    # sort by (-weight, index): stable argsort on -w gives exactly that
    order = np.argsort(-w, kind="stable")
    return order[:k]


def weights_tsv(global_w: GlobalWeights) -> str:
    lines = ["feature\tweight"]
    for i, w in enumerate(global_w.weights):
        lines.append(f"{i}\t{repr(float(w))}")
    return "\n".join(lines) + "\n"


def parse_weights_tsv(text: str) -> GlobalWeights:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "feature\tweight":
        raise ValueError("expected a 'feature\\tweight' header")
    vals = []
    for ln in lines[1:]:
        idx, w = ln.split("\t")
        vals.append((int(idx), float(w)))
    vals.sort()
    return GlobalWeights(np.array([w for _, w in vals]), 0)


def write_selected_indices(indices, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in indices:
            fh.write(f"{int(i)}\n")


def read_selected_indices(path: str) -> list[int]:
    with open(path, "r", encoding="utf-8") as fh:
        return [int(ln) for ln in fh if ln.strip()]
