"""Peptide sequence datasets: FASTA parsing, label tables, deduplication, stats.

File formats: FASTA (ASCII, '>' headers, wrapped lines allowed) and UTF-8
TSV label tables with a header row naming the 11 activity groups.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .errors import DataError

# The 20 standard one-letter amino-acid codes. Ambiguity codes (X, B, Z, ...)
# are rejected so that one-hot encoding stays well-defined.
AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
_AMINO_SET = frozenset(AMINO_ACIDS)

# Activity target groups, fixed order.
ACTIVITY_LABELS = (
    "Gram-positive",
    "Gram-negative",
    "Mammalian Cell",
    "Virus",
    "Fungus",
    "Insect",
    "Cancer",
    "Parasite",
    "Mollicute",
    "Nematode",
    "Protista",
)
N_ACTIVITY_LABELS = len(ACTIVITY_LABELS)


@dataclass(frozen=True)
class LabeledSequence:
    """One peptide record with optional binary and activity labels."""

    id: str
    residues: str
    amp_label: bool | None = None
    activity_labels: tuple[bool, ...] | None = None

    def __post_init__(self):
        if not self.residues:
            raise DataError(f"record {self.id!r}: empty residue string")
        bad = set(self.residues) - _AMINO_SET
        if bad:
            raise DataError(
                f"record {self.id!r}: illegal residue symbol(s) {sorted(bad)}"
            )
        if self.activity_labels is not None:
            if self.amp_label is False:
                raise DataError(
                    f"record {self.id!r}: activity labels on a non-AMP record"
                )
            if len(self.activity_labels) != N_ACTIVITY_LABELS:
                raise DataError(
                    f"record {self.id!r}: expected {N_ACTIVITY_LABELS} activity "
                    f"labels, got {len(self.activity_labels)}"
                )


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of LabeledSequence with a fixed label vocabulary."""

    sequences: tuple[LabeledSequence, ...]
    label_names: tuple[str, ...] = ACTIVITY_LABELS
    provenance: str = ""

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.sequences)


def parse_fasta(text) -> list[tuple[str, str]]:
    """Parse FASTA text into (id, residues) pairs in file order.

    `text` may be a string or an iterable of lines. Residues are uppercased
    and joined across wrapped lines; the id is the first whitespace-delimited
    token of the header. Raises DataError (with a line number) on sequence
    data before any header, empty records, or illegal residue symbols.
    """
    if isinstance(text, str):
        lines: Iterable[str] = text.splitlines()
    else:
        lines = text
    records: list[tuple[str, str]] = []
    header: str | None = None
    header_line = 0
    parts: list[str] = []

    def flush():
        if header is None:
            return
        residues = "".join(parts)
        if not residues:
            raise DataError(f"line {header_line}: record {header!r} has an empty body")
        records.append((header, residues))

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            tokens = line[1:].split()
            if not tokens:
                raise DataError(f"line {lineno}: header with no id")
            header = tokens[0]
            header_line = lineno
            parts = []
        else:
            if header is None:
                raise DataError(f"line {lineno}: sequence data before any '>' header")
            chunk = line.upper()
            bad = set(chunk) - _AMINO_SET
            if bad:
                raise DataError(
                    f"line {lineno}: illegal residue symbol(s) {sorted(bad)}"
                )
            parts.append(chunk)
    flush()
    return records


def serialize_fasta(records: Iterable[tuple[str, str]], width: int = 60) -> str:
    """Render (id, residues) pairs back to FASTA text."""
    out = []
    for rid, residues in records:
        out.append(f">{rid}")
        for i in range(0, len(residues), width):
            out.append(residues[i : i + width])
    return "\n".join(out) + "\n"


def parse_labels(table, label_names=ACTIVITY_LABELS) -> dict[str, tuple[bool, ...]]:
    """Parse a TSV label table into id -> activity boolean vector.

    The header row must name the activities exactly, in order. Each data row
    is "id<TAB>b1..b11" with 0/1 cells. Raises DataError on wrong column
    count, non-0/1 cells, unknown columns, or duplicate ids.
    """
    if isinstance(table, str):
        lines: Iterable[str] = table.splitlines()
    else:
        lines = table
    it = iter(enumerate(lines, start=1))
    header_line = None
    for lineno, raw in it:
        if raw.strip():
            header_line = (lineno, raw.rstrip("\n"))
            break
    if header_line is None:
        raise DataError("label table is empty")
    cols = header_line[1].split("\t")
    expected = ["id", *label_names]
    if cols != expected:
        raise DataError(
            f"line {header_line[0]}: bad header columns {cols!r}; "
            f"expected {expected!r}"
        )
    out: dict[str, tuple[bool, ...]] = {}
    for lineno, raw in it:
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != len(expected):
            raise DataError(
                f"line {lineno}: expected {len(expected)} columns, got {len(cells)}"
            )
        rid = cells[0]
        if rid in out:
            raise DataError(f"line {lineno}: duplicate id {rid!r}")
        bits = []
        for name, cell in zip(label_names, cells[1:]):
            if cell not in ("0", "1"):
                raise DataError(
                    f"line {lineno}: column {name!r} has non-0/1 cell {cell!r}"
                )
            bits.append(cell == "1")
        out[rid] = tuple(bits)
    return out


def build_dataset(
    records: Iterable[tuple[str, str]],
    labels: Mapping[str, tuple[bool, ...]] | None = None,
    label_names=ACTIVITY_LABELS,
    provenance: str = "",
) -> Dataset:
    """Assemble a Dataset from parsed records and an optional label table.

    With a label table, ids present in it become AMPs carrying their activity
    vector and absent ids become non-AMPs; without one every record is
    unlabeled. Duplicate ids with differing residues are rejected.
    """
    seen: dict[str, str] = {}
    seqs = []
    for rid, residues in records:
        if rid in seen:
            if seen[rid] != residues:
                raise DataError(f"duplicate id {rid!r} with differing residues")
            continue
        seen[rid] = residues
        if labels is None:
            seqs.append(LabeledSequence(rid, residues))
        elif rid in labels:
            seqs.append(
                LabeledSequence(rid, residues, amp_label=True,
                                activity_labels=tuple(labels[rid]))
            )
        else:
            seqs.append(LabeledSequence(rid, residues, amp_label=False))
    return Dataset(tuple(seqs), tuple(label_names), provenance)


def _merge_pair(kept: LabeledSequence, dup: LabeledSequence) -> LabeledSequence:
    if (kept.amp_label is True and dup.amp_label is False) or (
        kept.amp_label is False and dup.amp_label is True
    ):
        raise DataError(
            f"duplicate sequences {kept.id!r} and {dup.id!r} have conflicting "
            "AMP labels (one true, one false)"
        )
    amp = kept.amp_label if kept.amp_label is not None else dup.amp_label
    a, b = kept.activity_labels, dup.activity_labels
    if a is None:
        merged = b
    elif b is None:
        merged = a
    else:
        merged = tuple(x or y for x, y in zip(a, b))
    return replace(kept, amp_label=amp, activity_labels=merged)


def deduplicate(dataset: Dataset) -> tuple[Dataset, int]:
    """Collapse records sharing a residue string; labels merge by OR.

    Keeps the first occurrence's id. Returns (dataset, number of removed
    records). Raises DataError when duplicates disagree on the AMP label.
    """
    by_residues: dict[str, int] = {}
    kept: list[LabeledSequence] = []
    removed = 0
    for seq in dataset.sequences:
        slot = by_residues.get(seq.residues)
        if slot is None:
            by_residues[seq.residues] = len(kept)
            kept.append(seq)
        else:
            kept[slot] = _merge_pair(kept[slot], seq)
            removed += 1
    return Dataset(tuple(kept), dataset.label_names, dataset.provenance), removed


@dataclass(frozen=True)
class DatasetStats:
    label_counts: tuple[int, ...]          # positives per activity label
    cardinality_histogram: dict[int, int]  # labels-per-peptide -> peptide count
    n_records: int
    n_labeled: int


def dataset_stats(dataset: Dataset) -> DatasetStats:
    """Per-label positive counts and the labels-per-peptide histogram."""
    counts = [0] * len(dataset.label_names)
    hist: Counter[int] = Counter()
    n_labeled = 0
    for seq in dataset.sequences:
        if seq.activity_labels is None:
            continue
        n_labeled += 1
        k = 0
        for j, bit in enumerate(seq.activity_labels):
            if bit:
                counts[j] += 1
                k += 1
        hist[k] += 1
    return DatasetStats(tuple(counts), dict(sorted(hist.items())),
                        len(dataset.sequences), n_labeled)


def stats_tsv(stats: DatasetStats, label_names=ACTIVITY_LABELS) -> str:
    """Render stats as TSV: (kind, key, count) rows."""
    rows = ["kind\tkey\tcount"]
    for name, c in zip(label_names, stats.label_counts):
        rows.append(f"label\t{name}\t{c}")
    for k, c in stats.cardinality_histogram.items():
        rows.append(f"cardinality\t{k}\t{c}")
    rows.append(f"total\trecords\t{stats.n_records}")
    rows.append(f"total\tlabeled\t{stats.n_labeled}")
    return "\n".join(rows) + "\n"
