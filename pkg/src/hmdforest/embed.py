"""Per-sequence feature vectors: embedding files, mean pooling, one-hot encoding.

Embedding file format: UTF-8 text, first line "#dim <d>", then one row per
sequence "<id>\\t<v1>\\t...\\t<vd>" with round-trip decimal floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DataError
from .seqio import AMINO_ACIDS, Dataset

SOURCE_EMBEDDING = "embedding-file"
SOURCE_ONE_HOT = "one-hot"

DEFAULT_ONE_HOT_MAX_LEN = 200

# rank of each residue in alphabetical order over the 20 one-letter codes
_RESIDUE_RANK = {a: i for i, a in enumerate(AMINO_ACIDS)}


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense feature rows aligned 1:1 with sequence ids."""

    ids: tuple[str, ...]
    values: np.ndarray  # (n, d) float64
    source: str = SOURCE_EMBEDDING

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {v.shape}")
        if len(self.ids) != v.shape[0]:
            raise DataError(
                f"{len(self.ids)} ids do not align with {v.shape[0]} rows"
            )
        if v.size and not np.isfinite(v).all():
            raise DataError("feature matrix contains non-finite values")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return len(self.ids)


def load_embeddings(source) -> FeatureMatrix:
    """Load an embedding TSV (path, file object, or text) into a FeatureMatrix."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" not in source and "\t" not in source:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source
    lines = text.splitlines()
    it = iter(enumerate(lines, start=1))
    first = None
    for lineno, raw in it:
        if raw.strip():
            first = (lineno, raw.strip())
            break
    if first is None:
        raise DataError("embedding file is empty")
    tokens = first[1].split()
    if len(tokens) != 2 or tokens[0] != "#dim":
        raise DataError(f"line {first[0]}: expected header '#dim <d>', got {first[1]!r}")
    try:
        dim = int(tokens[1])
    except ValueError:
        raise DataError(f"line {first[0]}: non-integer dimension {tokens[1]!r}") from None
    if dim <= 0:
        raise DataError(f"line {first[0]}: dimension must be positive, got {dim}")

    ids: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    for lineno, raw in it:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        cells = line.split("\t")
        rid = cells[0]
        if rid in seen:
            raise DataError(f"line {lineno}: duplicate id {rid!r}")
        if len(cells) - 1 != dim:
            raise DataError(
                f"line {lineno}: id {rid!r} has {len(cells) - 1} values, expected {dim}"
            )
        try:
            row = np.array([float(c) for c in cells[1:]], dtype=np.float64)
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric cell in row {rid!r}") from None
        if not np.isfinite(row).all():
            raise DataError(f"line {lineno}: non-finite value in row {rid!r}")
        seen.add(rid)
        ids.append(rid)
        rows.append(row)
    values = np.vstack(rows) if rows else np.empty((0, dim), dtype=np.float64)
    return FeatureMatrix(tuple(ids), values, SOURCE_EMBEDDING)


def write_embeddings(matrix: FeatureMatrix, path: str) -> None:
    """Write a FeatureMatrix in the embedding TSV format (round-trip precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim {matrix.dim}\n")
        for rid, row in zip(matrix.ids, matrix.values):
            fh.write(rid)
            for v in row:
                fh.write("\t")
                fh.write(repr(float(v)))
            fh.write("\n")


def mean_pool(residue_matrix: np.ndarray) -> np.ndarray:
    """Arithmetic mean over residue positions of an L x d matrix."""
    m = np.asarray(residue_matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise DataError(f"mean_pool needs a non-empty L x d matrix, got shape {m.shape}")
    return m.mean(axis=0)


def one_hot_encode(residues: str, max_len: int = DEFAULT_ONE_HOT_MAX_LEN) -> np.ndarray:
    """Flat one-hot vector of length 20*max_len.

    Position i with residue a sets index 20*i + rank(a), rank alphabetical
    over the 20 codes. Longer sequences truncate, shorter ones zero-pad.
    """
    if not residues:
        raise DataError("cannot one-hot encode an empty sequence")
    out = np.zeros(20 * max_len, dtype=np.float64)
    for i, a in enumerate(residues[:max_len]):
        rank = _RESIDUE_RANK.get(a)
        if rank is None:
            raise DataError(f"illegal residue symbol {a!r}")
        out[20 * i + rank] = 1.0
    return out


def one_hot_matrix(dataset: Dataset, max_len: int = DEFAULT_ONE_HOT_MAX_LEN) -> FeatureMatrix:
    """One-hot FeatureMatrix for every sequence of a dataset."""
    rows = [one_hot_encode(s.residues, max_len) for s in dataset.sequences]
    values = np.vstack(rows) if rows else np.empty((0, 20 * max_len))
    return FeatureMatrix(dataset.ids, values, SOURCE_ONE_HOT)


def join(dataset: Dataset, matrix: FeatureMatrix) -> np.ndarray:
    """Feature rows aligned to dataset order; missing ids raise with the full list."""
    index = {rid: i for i, rid in enumerate(matrix.ids)}
    missing = [s.id for s in dataset.sequences if s.id not in index]
    if missing:
        raise DataError(f"ids missing from feature matrix: {missing}")
    if len(dataset) == 0:
        return np.empty((0, matrix.dim), dtype=np.float64)
    sel = np.array([index[s.id] for s in dataset.sequences], dtype=np.intp)
    return matrix.values[sel]


def select_columns(matrix: FeatureMatrix, indices: Iterable[int]) -> FeatureMatrix:
    """Project onto a feature subset; row order and ids are unchanged."""
    idx = np.asarray(list(indices), dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= matrix.dim):
        raise DataError(f"feature index out of range for dim {matrix.dim}")
    return FeatureMatrix(matrix.ids, matrix.values[:, idx], matrix.source)
