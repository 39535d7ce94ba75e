import numpy as np
import pytest

from hmdforest.explain import (
    FeatureStats,
    GlobalWeights,
    default_sigma,
    global_weights,
    local_weights,
    parse_weights_tsv,
    perturb,
    select_top_k,
    weights_tsv,
)


def closed_form_weighted_ridge(samples, y, w, stats, ridge):
    """Oracle: explicit normal-equations solve with matrix inversion."""
    Z = (samples - stats.mean) / np.where(stats.std > 0, stats.std, 1.0)
    A = np.hstack([np.ones((Z.shape[0], 1)), Z])
    W = np.diag(w)
    D = np.eye(A.shape[1])
    D[0, 0] = 0.0  # intercept unpenalized
    beta = np.linalg.inv(A.T @ W @ A + ridge * D) @ (A.T @ W @ y)
    return beta[1:]


def _std_stats(d):
    return FeatureStats(np.zeros(d), np.ones(d))


class TestPerturb:
    def test_single_sample_is_instance(self):
        x = np.array([1.0, 2.0, 3.0])
        samples, w = perturb(x, 1, _std_stats(3), np.random.default_rng(0))
        assert samples.shape == (1, 3)
        assert np.array_equal(samples[0], x)
        assert w[0] == 1.0

    def test_instance_weight_exactly_one(self):
        x = np.zeros(4)
        samples, w = perturb(x, 50, _std_stats(4), np.random.default_rng(1))
        assert w[0] == 1.0
        assert np.all(w <= 1.0) and np.all(w > 0.0)

    def test_fixed_seed_reproducible(self):
        x = np.zeros(4)
        s1, w1 = perturb(x, 20, _std_stats(4), np.random.default_rng(7))
        s2, w2 = perturb(x, 20, _std_stats(4), np.random.default_rng(7))
        assert np.array_equal(s1, s2) and np.array_equal(w1, w2)

    def test_zero_variance_feature_constant(self):
        stats = FeatureStats(np.zeros(3), np.array([1.0, 0.0, 1.0]))
        x = np.array([0.5, 9.0, -0.5])
        samples, _ = perturb(x, 30, stats, np.random.default_rng(2))
        assert np.all(samples[:, 1] == 9.0)


class TestLocalWeights:
    def test_recovers_linear_coefficient(self):
        rng = np.random.default_rng(3)
        d = 5
        stats = _std_stats(d)
        x = rng.normal(size=d)
        exp = local_weights(lambda s: 3.0 * s[:, 1], x, stats, n_samples=600, seed=4)
        assert abs(exp.weights[1] - 3.0) < 0.1
        others = np.delete(exp.weights, 1)
        assert np.all(np.abs(others) < 0.1)

    def test_constant_score_gives_zeros(self):
        stats = _std_stats(4)
        exp = local_weights(lambda s: np.full(s.shape[0], 2.5), np.zeros(4), stats,
                            n_samples=200, seed=1)
        assert np.all(np.abs(exp.weights) < 1e-8)

    def test_duplicate_columns_split_weight(self):
        rng = np.random.default_rng(5)
        stats = _std_stats(1)
        x1 = rng.normal(size=1)
        single = local_weights(lambda s: 2.0 * s[:, 0], x1, stats,
                               n_samples=500, seed=6)
        dup_stats = FeatureStats(np.zeros(2), np.ones(2))
        x2 = np.array([x1[0], x1[0]])

        def dup_score(s):
            shared = (s[:, 0] + s[:, 1]) / 2.0
            return 2.0 * shared

        dup = local_weights(dup_score, x2, dup_stats, n_samples=500, seed=6)
        assert abs(dup.weights.sum() - single.weights[0]) < 0.1

    def test_matches_closed_form_oracle(self):
        rng = np.random.default_rng(8)
        for trial in range(10):
            d = int(rng.integers(1, 11))
            stats = FeatureStats(rng.normal(size=d), rng.random(d) + 0.5)
            x = rng.normal(size=d)
            coef = rng.normal(size=d)

            def score(s):
                return s @ coef + 0.7

            got = local_weights(score, x, stats, n_samples=80, ridge=1e-3,
                                seed=trial)
            samples, w = perturb(x, 80, stats, np.random.default_rng(trial),
                                 default_sigma(d))
            want = closed_form_weighted_ridge(samples, score(samples), w, stats, 1e-3)
            assert np.allclose(got.weights, want, atol=1e-8)

    def test_bad_ridge_rejected(self):
        with pytest.raises(ValueError):
            local_weights(lambda s: s[:, 0], np.zeros(2), _std_stats(2), ridge=0.0)


class TestGlobalWeights:
    def test_single_instance_equals_local(self):
        stats = _std_stats(3)
        x = np.array([[0.3, -0.2, 1.0]])
        gw = global_weights(lambda s: s[:, 2], x, stats, n_samples=100, seed=9)
        local = local_weights(lambda s: s[:, 2], x[0], stats, n_samples=100,
                              seed=(9, 0))
        assert np.allclose(gw.weights, local.weights)
        assert gw.n_instances == 1

    def test_opposite_weights_cancel(self):
        w = np.array([1.0, -2.0, 0.5])
        assert np.allclose((w + (-w)) / 2, 0.0)  # averaging semantics

    def test_planted_linear_model_dominates(self):
        rng = np.random.default_rng(10)
        d, informative = 30, 4
        coef = np.zeros(d)
        coef[:informative] = [4.0, 3.5, 3.0, 2.5]
        X = rng.normal(size=(8, d))
        stats = FeatureStats.from_matrix(rng.normal(size=(200, d)))
        gw = global_weights(lambda s: s @ coef, X, stats, n_samples=300, seed=11)
        top = set(select_top_k(gw, k=informative).tolist())
        assert top == set(range(informative))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            global_weights(lambda s: s[:, 0], np.zeros((0, 2)), _std_stats(2))


class TestSelectTopK:
    def test_k_equals_d_returns_all(self):
        gw = GlobalWeights(np.array([0.3, 0.1, 0.2]), 1)
        assert select_top_k(gw, k=3).tolist() == [0, 2, 1]

    def test_spec_example(self):
        gw = GlobalWeights(np.array([0.1, 0.9, 0.5]), 1)
        assert select_top_k(gw, k=2).tolist() == [1, 2]

    def test_default_is_48(self):
        gw = GlobalWeights(np.arange(100.0), 1)
        assert len(select_top_k(gw)) == 48

    def test_tie_break_lower_index(self):
        gw = GlobalWeights(np.array([0.5, 0.9, 0.5, 0.9]), 1)
        assert select_top_k(gw, k=4).tolist() == [1, 3, 0, 2]

    def test_abs_ranking(self):
        gw = GlobalWeights(np.array([-5.0, 1.0, 2.0]), 1)
        assert select_top_k(gw, k=1, by_abs=True).tolist() == [0]
        assert select_top_k(gw, k=1).tolist() == [2]

    def test_bad_k(self):
        gw = GlobalWeights(np.ones(3), 1)
        with pytest.raises(ValueError):
            select_top_k(gw, k=0)
        with pytest.raises(ValueError):
            select_top_k(gw, k=4)

    def test_sorted_descending_no_repeats(self):
        rng = np.random.default_rng(12)
        gw = GlobalWeights(rng.normal(size=50), 1)
        idx = select_top_k(gw, k=20)
        vals = gw.weights[idx]
        assert np.all(np.diff(vals) <= 0)
        assert len(set(idx.tolist())) == 20


def test_weights_tsv_round_trip():
    gw = GlobalWeights(np.array([0.25, -1.5, 3.75]), 5)
    back = parse_weights_tsv(weights_tsv(gw))
    assert np.array_equal(back.weights, gw.weights)
