import pytest
from hypothesis import given, strategies as st

from hmdforest.errors import DataError
from hmdforest.seqio import (
    ACTIVITY_LABELS,
    AMINO_ACIDS,
    Dataset,
    LabeledSequence,
    build_dataset,
    dataset_stats,
    deduplicate,
    parse_fasta,
    parse_labels,
    serialize_fasta,
    stats_tsv,
)


def _vec(*on):
    return tuple(name in on for name in ACTIVITY_LABELS)


class TestParseFasta:
    def test_wrapped_lines_join(self):
        assert parse_fasta(">p1\nMK\nLV\n") == [("p1", "MKLV")]

    def test_two_records_in_order(self):
        assert parse_fasta(">a\nACDE\n>b\nWYY\n") == [("a", "ACDE"), ("b", "WYY")]

    def test_empty_record_rejected(self):
        with pytest.raises(DataError, match="empty body"):
            parse_fasta(">x\n\n")

    def test_sequence_before_header(self):
        with pytest.raises(DataError, match="line 1"):
            parse_fasta("ACDE\n>a\nMK\n")

    def test_illegal_residue_reports_line(self):
        with pytest.raises(DataError, match="line 3"):
            parse_fasta(">a\nAC\nAXC\n")

    def test_lowercase_uppercased(self):
        assert parse_fasta(">a\nacde\n") == [("a", "ACDE")]

    def test_header_id_is_first_token(self):
        assert parse_fasta(">a some description\nMK\n") == [("a", "MK")]

    @given(st.lists(st.text(alphabet=AMINO_ACIDS, min_size=1, max_size=80), min_size=1, max_size=8))
    def test_round_trip(self, bodies):
        records = [(f"s{i}", body) for i, body in enumerate(bodies)]
        assert parse_fasta(serialize_fasta(records)) == records


class TestParseLabels:
    HEADER = "id\t" + "\t".join(ACTIVITY_LABELS)

    def test_basic_row(self):
        table = self.HEADER + "\np1\t1\t1\t0\t0\t0\t0\t0\t0\t0\t0\t0\n"
        out = parse_labels(table)
        assert out["p1"] == _vec("Gram-positive", "Gram-negative")

    def test_wrong_column_count(self):
        table = self.HEADER + "\np1\t" + "\t".join(["1"] * 10) + "\n"
        with pytest.raises(DataError, match="columns"):
            parse_labels(table)

    def test_duplicate_id(self):
        row = "p1\t" + "\t".join(["0"] * 11)
        with pytest.raises(DataError, match="duplicate id"):
            parse_labels(self.HEADER + f"\n{row}\n{row}\n")

    def test_non_binary_cell(self):
        table = self.HEADER + "\np1\t2\t" + "\t".join(["0"] * 10) + "\n"
        with pytest.raises(DataError, match="non-0/1"):
            parse_labels(table)

    def test_unknown_column_rejected(self):
        with pytest.raises(DataError, match="header"):
            parse_labels("id\tWrong\n")


class TestDeduplicate:
    def _ds(self, rows):
        return Dataset(tuple(rows))

    def test_or_merge(self):
        ds = self._ds([
            LabeledSequence("a", "MKLV", True, _vec("Gram-positive")),
            LabeledSequence("b", "MKLV", True, _vec("Virus")),
        ])
        out, removed = deduplicate(ds)
        assert removed == 1
        assert len(out) == 1
        assert out.sequences[0].id == "a"
        assert out.sequences[0].activity_labels == _vec("Gram-positive", "Virus")

    def test_distinct_unchanged(self):
        ds = self._ds([
            LabeledSequence("a", "MKLV"),
            LabeledSequence("b", "WYY"),
        ])
        out, removed = deduplicate(ds)
        assert removed == 0
        assert out.sequences == ds.sequences

    def test_conflicting_amp_labels(self):
        ds = self._ds([
            LabeledSequence("a", "MKLV", True, _vec("Virus")),
            LabeledSequence("b", "MKLV", False),
        ])
        with pytest.raises(DataError, match="'a'.*'b'"):
            deduplicate(ds)

    def test_idempotent(self):
        ds = self._ds([
            LabeledSequence("a", "MKLV", True, _vec("Virus")),
            LabeledSequence("b", "MKLV", True, _vec("Fungus")),
            LabeledSequence("c", "WYY", False),
        ])
        once, _ = deduplicate(ds)
        twice, removed = deduplicate(once)
        assert removed == 0
        assert twice.sequences == once.sequences


class TestDatasetStats:
    def test_counts_and_histogram(self):
        ds = Dataset((
            LabeledSequence("a", "MK", True, _vec("Gram-positive", "Virus")),
            LabeledSequence("b", "WY", True, _vec("Gram-positive")),
            LabeledSequence("c", "AC", False),
        ))
        stats = dataset_stats(ds)
        assert stats.label_counts[ACTIVITY_LABELS.index("Gram-positive")] == 2
        assert stats.label_counts[ACTIVITY_LABELS.index("Virus")] == 1
        assert stats.cardinality_histogram == {1: 1, 2: 1}
        assert stats.n_labeled == 2

    def test_empty_dataset_zeroes(self):
        stats = dataset_stats(Dataset(()))
        assert all(c == 0 for c in stats.label_counts)
        assert stats.cardinality_histogram == {}

    def test_histogram_sums_to_labeled_count(self):
        rows = []
        for i in range(7):
            on = tuple(ACTIVITY_LABELS[: (i % 4)])
            rows.append(LabeledSequence(f"s{i}", "MK", True, _vec(*on)))
        stats = dataset_stats(Dataset(tuple(rows)))
        assert sum(stats.cardinality_histogram.values()) == stats.n_labeled == 7

    def test_stats_tsv_shape(self):
        text = stats_tsv(dataset_stats(Dataset(())))
        assert text.startswith("kind\tkey\tcount\n")
        assert len(text.splitlines()) == 1 + 11 + 2


class TestBuildDataset:
    def test_labels_split_amp(self):
        records = [("a", "MK"), ("b", "WY")]
        ds = build_dataset(records, {"a": _vec("Virus")})
        assert ds.sequences[0].amp_label is True
        assert ds.sequences[1].amp_label is False
        assert ds.sequences[1].activity_labels is None

    def test_duplicate_id_conflict(self):
        with pytest.raises(DataError, match="differing residues"):
            build_dataset([("a", "MK"), ("a", "WY")])

    def test_activity_on_non_amp_rejected(self):
        with pytest.raises(DataError):
            LabeledSequence("a", "MK", amp_label=False, activity_labels=_vec("Virus"))
