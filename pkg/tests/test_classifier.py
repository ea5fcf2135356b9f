import numpy as np
import pytest

from conftest import random_orthonormal_chain
from ttnpe.classifier import evaluate, knn_classify
from ttnpe.tt_subspace import tt_svd


class TestKnnClassify:
    def test_single_neighbor(self):
        train = np.array([[0.0], [1.0], [2.0]])
        labels = np.array([0, 1, 1])
        preds = knn_classify(train, labels, np.array([[0.1], [1.9]]), 1)
        assert preds.tolist() == [0, 1]

    def test_majority_vote(self):
        train = np.array([[0.0], [0.1], [0.2], [5.0]])
        labels = np.array([0, 0, 1, 1])
        preds = knn_classify(train, labels, np.array([[0.0]]), 3)
        assert preds.tolist() == [0]

    def test_distance_tie_lower_index_wins(self):
        # test point equidistant from both training points
        train = np.array([[-1.0], [1.0]])
        labels = np.array([3, 7])
        preds = knn_classify(train, labels, np.array([[0.0]]), 1)
        assert preds.tolist() == [3]

    def test_vote_tie_nearest_tied_class_wins(self):
        # K=2 picks one of each class; class of the closer neighbor wins
        train = np.array([[0.0], [1.0]])
        labels = np.array([5, 9])
        preds = knn_classify(train, labels, np.array([[0.2]]), 2)
        assert preds.tolist() == [5]
        preds = knn_classify(train, labels, np.array([[0.8]]), 2)
        assert preds.tolist() == [9]

    def test_k_equals_n_train(self):
        train = np.array([[0.0], [1.0], [2.0]])
        labels = np.array([1, 1, 0])
        preds = knn_classify(train, labels, np.array([[10.0]]), 3)
        assert preds.tolist() == [1]

    def test_k_too_large(self):
        with pytest.raises(ValueError, match="K must be"):
            knn_classify(np.zeros((2, 1)), np.array([0, 1]), np.zeros((1, 1)), 3)

    def test_deterministic(self, rng):
        train = rng.standard_normal((20, 3))
        labels = rng.integers(0, 3, 20)
        test = rng.standard_normal((10, 3))
        a = knn_classify(train, labels, test, 5)
        b = knn_classify(train, labels, test, 5)
        assert np.array_equal(a, b)

    def test_orthogonal_map_invariance(self, rng):
        # distances are preserved under orthogonal maps, so predictions are too
        train = rng.standard_normal((15, 4))
        labels = rng.integers(0, 2, 15)
        test = rng.standard_normal((6, 4))
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        a = knn_classify(train, labels, test, 3)
        b = knn_classify(train @ q, labels, test @ q, 3)
        assert np.array_equal(a, b)


class TestEvaluate:
    def clustered(self, rng, per_class=5, dims=(2, 2, 2)):
        c0 = np.zeros(dims)
        c1 = np.full(dims, 8.0)
        samples = [c0 + 0.1 * rng.standard_normal(dims) for _ in range(per_class)]
        samples += [c1 + 0.1 * rng.standard_normal(dims) for _ in range(per_class)]
        labels = np.array([0] * per_class + [1] * per_class)
        return np.stack(samples, axis=-1), labels

    def test_baseline_perfect_on_clusters(self, rng):
        data, labels = self.clustered(rng)
        res = evaluate(None, data, labels, data, labels, 1)
        assert res.error_rate == 0.0
        assert res.compression_ratio == 1.0
        assert res.n_wrong == 0
        assert res.confusion == {(0, 0): 5, (1, 1): 5}

    def test_full_rank_chain_matches_baseline(self, rng):
        # a full-rank chain is an isometry on the data, so errors agree exactly
        data, labels = self.clustered(rng)
        test, test_labels = self.clustered(rng)
        chain = tt_svd(data, 1e-14)
        base = evaluate(None, data, labels, test, test_labels, 3)
        emb = evaluate(chain, data, labels, test, test_labels, 3)
        assert base.error_rate == emb.error_rate
        assert base.confusion == emb.confusion

    def test_compression_below_one_for_low_rank(self, rng):
        data, labels = self.clustered(rng, per_class=10)
        chain = tt_svd(data, 0.3, rank_cap=2)
        res = evaluate(chain, data, labels, data, labels, 1)
        assert 0.0 < res.compression_ratio < 1.0

    def test_confusion_totals(self, rng):
        data, labels = self.clustered(rng)
        chain = tt_svd(data, 0.5)
        res = evaluate(chain, data, labels, data, labels, 3)
        assert sum(res.confusion.values()) == res.n_test
        off_diag = sum(v for (t, p), v in res.confusion.items() if t != p)
        assert off_diag == res.n_wrong

    def test_error_rate_range(self, rng):
        data = rng.standard_normal((2, 2, 12))
        labels = rng.integers(0, 2, 12)
        res = evaluate(None, data, labels, data, labels, 3)
        assert 0.0 <= res.error_rate <= 1.0

    def test_projection_coords_used(self, rng):
        # rank-1 chain collapses everything to R_n=1 coordinates; an orthonormal
        # chain cannot make error worse than chance on its own training data
        data, labels = self.clustered(rng)
        chain = random_orthonormal_chain(rng, (2, 2, 2), (1, 1, 1))
        res = evaluate(chain, data, labels, data, labels, 1)
        assert res.compression_ratio < 1.0
        assert res.n_test == 10
