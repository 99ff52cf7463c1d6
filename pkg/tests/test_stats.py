import numpy as np
import pytest

from spacerot.core import TextWeights
from spacerot.queue import DynamicQueue
from spacerot.stats import (
    InsufficientStatisticsError,
    class_means,
    pooled_covariance,
)


def weights_eye(n, d):
    mat = np.zeros((n, d))
    mat[:, :n] = np.eye(n)
    return TextWeights(matrix=mat)


def fill_queue(assignments, n_classes=3, d=4, capacity=8):
    """assignments: list of (class, feature array)."""
    q = DynamicQueue(n_classes, capacity, temperature=1.0)
    for t, (label, feat) in enumerate(assignments):
        q.update(np.asarray(feat, dtype=float), label, np.random.default_rng(t).normal(size=n_classes), t)
    return q


class TestClassMeans:
    def test_singleton_mean_is_the_feature(self):
        f = np.array([0.5, 0.5, 0.5, 0.5])
        q = fill_queue([(0, f)])
        protos = class_means(q, weights_eye(3, 4))
        assert np.allclose(protos.means[0], f)
        assert protos.support[0] == 1
        assert not protos.fallback_mask[0]

    def test_two_point_mean(self):
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        q = DynamicQueue(2, 4, temperature=1.0)
        q.update(e1, 0, np.array([1.0, 0.0]), 0)
        q.update(e2, 0, np.array([1.0, 0.0]), 1)
        protos = class_means(q, weights_eye(2, 2))
        assert np.allclose(protos.means[0], [0.5, 0.5])

    def test_empty_class_falls_back_to_text_row(self):
        q = fill_queue([(0, np.ones(4))])
        w = weights_eye(3, 4)
        protos = class_means(q, w)
        assert np.array_equal(protos.means[2], w.matrix[2])
        assert protos.fallback_mask[2]
        assert protos.support[2] == 0


class TestPooledCovariance:
    def test_all_singletons_give_eps_identity(self):
        q = fill_queue([(0, [1.0, 0, 0, 0]), (1, [0, 1.0, 0, 0]), (2, [0, 0, 1.0, 0])])
        protos = class_means(q, weights_eye(3, 4))
        cov = pooled_covariance(q, protos)
        assert cov.regularization_eps == 1e-12
        assert np.allclose(cov.values, 1e-12 * np.eye(4))

    def test_rank_one_closed_form(self):
        u = np.array([0.5, -0.5, 0.5, -0.5])
        q = DynamicQueue(3, 4, temperature=1.0)
        q.update(u, 0, np.zeros(3), 0)
        q.update(-u, 0, np.zeros(3), 1)
        protos = class_means(q, weights_eye(3, 4))
        cov = pooled_covariance(q, protos)
        expected = np.outer(u, u)  # mean is zero; both deviations are +-u
        assert np.allclose(cov.values - cov.regularization_eps * np.eye(4), expected, atol=1e-12)

    def test_matches_triple_loop_oracle(self, rng):
        n, d, cap = 5, 16, 8
        q = DynamicQueue(n, cap, temperature=1.0)
        feats = []
        for t in range(80):
            label = int(rng.integers(n))
            f = rng.normal(size=d)
            q.update(f, label, rng.normal(size=n), t)
        protos = class_means(q, TextWeights(matrix=rng.normal(size=(n, d))))
        cov = pooled_covariance(q, protos)
        # naive summation oracle
        expected = np.zeros((d, d))
        populated = 0
        for k in range(n):
            members = q.class_members(k)
            if not members:
                continue
            mk = protos.means[k]
            m_count = len(members)
            for e in members:
                delta = e.feature - mk
                for i in range(d):
                    for j in range(d):
                        expected[i, j] += delta[i] * delta[j] / m_count
            populated += 1
        expected /= populated
        eps = max(1e-6 * np.trace(expected) / d, 1e-12)
        expected += eps * np.eye(d)
        assert np.allclose(cov.values, expected, atol=1e-9)

    def test_strict_normalization_divides_by_all_classes(self):
        u = np.array([1.0, 0, 0, 0])
        q = DynamicQueue(4, 4, temperature=1.0)
        q.update(u, 0, np.zeros(4), 0)
        q.update(-u, 0, np.zeros(4), 1)
        protos = class_means(q, weights_eye(4, 4))
        loose = pooled_covariance(q, protos)
        strict = pooled_covariance(q, protos, strict_class_normalization=True)
        loose_core = loose.values - loose.regularization_eps * np.eye(4)
        strict_core = strict.values - strict.regularization_eps * np.eye(4)
        assert np.allclose(strict_core * 4, loose_core, atol=1e-12)

    def test_all_empty_raises(self):
        q = DynamicQueue(3, 4, temperature=1.0)
        protos = class_means(q, weights_eye(3, 4))
        with pytest.raises(InsufficientStatisticsError):
            pooled_covariance(q, protos)

    def test_symmetry_and_psd(self, rng):
        q = DynamicQueue(4, 8, temperature=1.0)
        for t in range(60):
            q.update(rng.normal(size=10), int(rng.integers(4)), rng.normal(size=4), t)
        protos = class_means(q, TextWeights(matrix=rng.normal(size=(4, 10))))
        cov = pooled_covariance(q, protos)
        assert np.allclose(cov.values, cov.values.T, atol=1e-9)
        assert np.linalg.eigvalsh(cov.values).min() >= -1e-8
        assert np.trace(cov.values) >= 10 * cov.regularization_eps - 1e-15

    def test_invariant_under_class_relabeling(self, rng):
        n, d = 4, 6
        samples = [(int(rng.integers(n)), rng.normal(size=d), rng.normal(size=n)) for _ in range(50)]
        perm = rng.permutation(n)
        q1 = DynamicQueue(n, 8, temperature=1.0)
        q2 = DynamicQueue(n, 8, temperature=1.0)
        w = TextWeights(matrix=rng.normal(size=(n, d)))
        for t, (label, f, logits) in enumerate(samples):
            q1.update(f, label, logits, t)
            q2.update(f, int(perm[label]), logits, t)
        p1 = class_means(q1, w)
        p2 = class_means(q2, TextWeights(matrix=w.matrix[np.argsort(perm)]))
        c1 = pooled_covariance(q1, p1)
        c2 = pooled_covariance(q2, p2)
        assert np.allclose(c1.values, c2.values, atol=1e-9)

    def test_recompute_is_bit_identical(self, rng):
        q = DynamicQueue(3, 8, temperature=1.0)
        for t in range(40):
            q.update(rng.normal(size=5), int(rng.integers(3)), rng.normal(size=3), t)
        w = TextWeights(matrix=rng.normal(size=(3, 5)))
        p1 = class_means(q, w)
        p2 = class_means(q, w)
        assert np.array_equal(p1.means, p2.means)
        c1 = pooled_covariance(q, p1)
        c2 = pooled_covariance(q, p2)
        assert np.array_equal(c1.values, c2.values)
