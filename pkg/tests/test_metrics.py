import numpy as np
import pytest

from hmdforest.metrics import (
    ScoredLabelSet,
    classification_report,
    label_auc,
    macro_auc,
    roc_points,
    trapezoid_area,
)


def pair_count_auc(scores, truths):
    """O(n^2) oracle: fraction of (pos, neg) pairs with s_pos >= s_neg."""
    good = 0
    total = 0
    for i, ti in enumerate(truths):
        if not ti:
            continue
        for j, tj in enumerate(truths):
            if tj:
                continue
            total += 1
            if scores[i] >= scores[j]:
                good += 1
    return good / total


class TestMacroAuc:
    def test_perfect_ranking(self):
        s = np.array([[0.9], [0.8], [0.1]])
        t = np.array([[1], [1], [0]], dtype=bool)
        assert macro_auc(ScoredLabelSet(s, t)) == 1.0

    def test_reversed_ranking(self):
        s = np.array([[0.1], [0.2], [0.9]])
        t = np.array([[1], [1], [0]], dtype=bool)
        assert macro_auc(ScoredLabelSet(s, t)) == 0.0

    def test_half_ordered(self):
        # pairs: (0.9 vs 0.8) ordered, (0.3 vs 0.8) not
        s = np.array([[0.9], [0.8], [0.3]])
        t = np.array([[1], [0], [1]], dtype=bool)
        assert macro_auc(ScoredLabelSet(s, t)) == 0.5

    def test_ties_count_as_ordered(self):
        s = np.array([[0.5], [0.5]])
        t = np.array([[1], [0]], dtype=bool)
        assert macro_auc(ScoredLabelSet(s, t)) == 1.0

    def test_degenerate_label_excluded_with_warning(self):
        s = np.random.default_rng(0).random((6, 2))
        t = np.zeros((6, 2), dtype=bool)
        t[:3, 0] = True
        t[:, 1] = True  # degenerate
        with pytest.warns(UserWarning, match="degenerate"):
            value, per_label, excluded = macro_auc(
                ScoredLabelSet(s, t), return_per_label=True
            )
        assert excluded == [1]
        assert value == per_label[0]

    def test_all_degenerate_raises(self):
        s = np.zeros((3, 1))
        t = np.ones((3, 1), dtype=bool)
        with pytest.raises(ValueError):
            macro_auc(ScoredLabelSet(s, t))

    def test_matches_pair_counting_oracle(self):
        import warnings

        rng = np.random.default_rng(7)
        for _ in range(25):
            n, l = rng.integers(5, 40), rng.integers(1, 5)
            s = np.round(rng.random((n, l)), 2)  # induce ties
            t = rng.random((n, l)) < 0.4
            per_label_ok = [
                (t[:, j].any() and not t[:, j].all()) for j in range(l)
            ]
            if not any(per_label_ok):
                continue
            expected = np.mean(
                [pair_count_auc(s[:, j], t[:, j]) for j in range(l) if per_label_ok[j]]
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                got = macro_auc(ScoredLabelSet(s, t))
            assert abs(got - expected) < 1e-12

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(3)
        s = rng.normal(size=(30, 3))
        t = rng.random((30, 3)) < 0.5
        t[0] = [True] * 3
        t[1] = [False] * 3
        base = macro_auc(ScoredLabelSet(s, t))
        warped = s.copy()
        warped[:, 0] = np.exp(s[:, 0])
        warped[:, 1] = 3 * s[:, 1] - 10
        warped[:, 2] = np.tanh(s[:, 2])
        assert macro_auc(ScoredLabelSet(warped, t)) == pytest.approx(base, abs=1e-15)


class TestClassificationReport:
    def test_perfect(self):
        t = np.array([[1, 0], [0, 1]], dtype=bool)
        rep = classification_report(t, t)
        assert rep.subset_accuracy == 1.0
        assert rep.labelwise_accuracy == 1.0
        assert rep.macro_precision == 1.0
        assert rep.macro_recall == 1.0
        assert rep.macro_f1 == 1.0

    def test_all_negative_recall_zero(self):
        t = np.array([[1], [1], [0]], dtype=bool)
        p = np.zeros_like(t)
        rep = classification_report(p, t)
        assert rep.macro_recall == 0.0
        assert rep.macro_precision == 0.0  # 0/0 -> 0

    def test_one_wrong_cell(self):
        t = np.array([[1, 0], [0, 1]], dtype=bool)
        p = np.array([[1, 1], [0, 1]], dtype=bool)
        rep = classification_report(p, t)
        assert rep.subset_accuracy == 0.5
        assert rep.labelwise_accuracy == 0.75

    def test_macro_equals_mean_of_per_label(self):
        rng = np.random.default_rng(11)
        t = rng.random((40, 5)) < 0.3
        p = rng.random((40, 5)) < 0.3
        rep = classification_report(p, t)
        assert rep.macro_precision == pytest.approx(np.mean(rep.per_label_precision))
        assert rep.macro_recall == pytest.approx(np.mean(rep.per_label_recall))

    def test_scores_fill_auc(self):
        rng = np.random.default_rng(2)
        t = rng.random((30, 3)) < 0.5
        t[0], t[1] = [True] * 3, [False] * 3
        s = rng.random((30, 3))
        rep = classification_report(s >= 0.5, t, scores=s)
        assert rep.macro_auc == pytest.approx(macro_auc(ScoredLabelSet(s, t)))


class TestRocPoints:
    def test_perfect_separation_passes_0_1(self):
        pts = roc_points([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
        assert pts[0] == (0.0, 0.0)
        assert (0.0, 1.0) in pts
        assert pts[-1] == (1.0, 1.0)

    def test_single_top_positive(self):
        pts = roc_points([0.9, 0.5, 0.2], [True, False, False])
        assert pts[1] == (0.0, 1.0)

    def test_constant_scores_two_points(self):
        pts = roc_points([0.4, 0.4, 0.4], [True, False, True])
        assert pts == [(0.0, 0.0), (1.0, 1.0)]

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            roc_points([0.1, 0.2], [True, True])

    def test_area_matches_pairwise_auc_without_ties(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(4, 60))
            s = rng.permutation(n).astype(float)  # distinct scores
            t = rng.random(n) < 0.5
            if t.all() or not t.any():
                continue
            area = trapezoid_area(roc_points(s, t))
            assert abs(area - pair_count_auc(s, t)) < 1e-9

    def test_sorted_by_descending_threshold(self):
        pts = roc_points([0.1, 0.9, 0.5, 0.3], [False, True, True, False])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        assert xs == sorted(xs) and ys == sorted(ys)


def test_label_auc_requires_both_classes():
    with pytest.raises(ValueError):
        label_auc([0.1, 0.2], [True, True])


def test_report_table_alignment():
    from hmdforest.metrics import report_table

    rng = np.random.default_rng(1)
    t = rng.random((20, 2)) < 0.5
    t[0], t[1] = [True, True], [False, False]
    s = rng.random((20, 2))
    rep = classification_report(s >= 0.5, t, scores=s)
    table = report_table(rep, ["alpha", "a-much-longer-name"])
    lines = table.splitlines()
    assert lines[0].startswith("label")
    assert "macro_f1:" in table
    # header and rows share column offsets
    assert lines[0].index("precision") == lines[1].index(lines[1].split()[1])
