import numpy as np
import pytest

from spacerot.core import DimensionMismatchError
from spacerot.stats import PrototypeSet, CovarianceMatrix
from spacerot.basis import construct_basis, rotate_prototypes
from spacerot.classifier import (
    FusionConfig,
    ZeroNormPrototypeWarning,
    ncm_logits,
    distance_logits,
    soba_logits,
    fuse,
)


def protos(means):
    means = np.asarray(means, dtype=float)
    return PrototypeSet(
        means=means,
        support=np.ones(means.shape[0], dtype=int),
        fallback_mask=np.zeros(means.shape[0], dtype=bool),
    )


def unit(v, rng=None):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


class TestFusionConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            FusionConfig(alpha=np.inf)
        with pytest.raises(ValueError):
            FusionConfig(head="nope")
        assert FusionConfig().head == "soba"
        assert FusionConfig().alpha == 15.0
        assert FusionConfig().normalize_prototypes is False


class TestNcm:
    def test_self_similarity(self):
        p = protos(np.eye(3))
        assert np.allclose(ncm_logits(np.array([1.0, 0, 0]), p)[0], 1.0)

    def test_orthogonal_scores_zero(self):
        p = protos(np.eye(3))
        values = ncm_logits(np.array([0.0, 0.0, 1.0]), p)
        assert abs(values[0]) < 1e-12 and abs(values[1]) < 1e-12

    def test_matches_cosine_oracle(self, rng):
        means = rng.normal(size=(3, 8))
        f = rng.normal(size=8)
        got = ncm_logits(f, protos(means))
        expected = [
            float(means[k] @ f / (np.linalg.norm(means[k]) * np.linalg.norm(f)))
            for k in range(3)
        ]
        assert np.allclose(got, expected, atol=1e-9)

    def test_zero_norm_prototype_scores_worst(self):
        means = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.warns(ZeroNormPrototypeWarning):
            values = ncm_logits(np.array([1.0, 0.0]), protos(means))
        assert values[1] == -1.0

    def test_scale_invariance(self, rng):
        means = rng.normal(size=(4, 6))
        f = rng.normal(size=6)
        base = ncm_logits(f, protos(means))
        scaled = means.copy()
        scaled[2] *= 7.5
        assert np.allclose(ncm_logits(f, protos(scaled))[2], base[2], atol=1e-9)


class TestDistance:
    def test_zero_self_distance_is_max(self, rng):
        means = rng.normal(size=(3, 5))
        f = means[1].copy()
        for metric in ("l1", "l2"):
            values = distance_logits(f, protos(means), metric)
            assert values[1] == 0.0
            assert values.argmax() == 1

    def test_hand_distances(self):
        means = np.array([[0.0, 1.0], [1.0, 1.0]])
        f = np.array([1.0, 0.0])
        l2 = distance_logits(f, protos(means), "l2")
        l1 = distance_logits(f, protos(means), "l1")
        assert abs(l2[0] + np.sqrt(2.0)) < 1e-12
        assert abs(l1[0] + 2.0) < 1e-12

    def test_matches_loop_oracle(self, rng):
        means = rng.normal(size=(4, 7))
        f = rng.normal(size=7)
        l1 = distance_logits(f, protos(means), "l1")
        l2 = distance_logits(f, protos(means), "l2")
        for k in range(4):
            d1 = sum(abs(f[i] - means[k, i]) for i in range(7))
            d2 = np.sqrt(sum((f[i] - means[k, i]) ** 2 for i in range(7)))
            assert abs(l1[k] + d1) < 1e-9
            assert abs(l2[k] + d2) < 1e-9

    def test_l2_argmax_matches_ncm_on_unit_vectors(self, rng):
        means = np.stack([unit(rng.normal(size=6)) for _ in range(5)])
        for _ in range(20):
            f = unit(rng.normal(size=6))
            a = distance_logits(f, protos(means), "l2").argmax()
            b = ncm_logits(f, protos(means)).argmax()
            assert a == b

    def test_bad_metric(self):
        with pytest.raises(ValueError):
            distance_logits(np.ones(2), protos(np.eye(2)), "linf")


class TestSoba:
    def make_basis(self, rng, d, diagonal=False):
        if diagonal:
            values = np.diag(np.arange(d, 0, -1, dtype=float))
        else:
            a = rng.normal(size=(d, d))
            values = a @ a.T / d
        return construct_basis(CovarianceMatrix(values=values, regularization_eps=0.0))

    def test_identity_basis_reduces_to_inner_product(self, rng):
        d = 6
        b = self.make_basis(rng, d, diagonal=True)
        mu = rng.normal(size=(3, d))
        rotated = rotate_prototypes(mu, b)
        f = rng.normal(size=d)
        assert np.allclose(soba_logits(f, rotated, b), mu @ f, atol=1e-12)

    def test_symmetric_full_rank_degenerates(self, rng):
        d = 12
        b = self.make_basis(rng, d)
        mu = rng.normal(size=(4, d))
        rotated = rotate_prototypes(mu, b)
        f = rng.normal(size=d)
        sym = soba_logits(f, rotated, b, mode="symmetric")
        assert np.allclose(sym, mu @ f, atol=1e-9)

    def test_prototype_only_matches_entrywise_oracle(self, rng):
        d, n = 10, 4
        b = self.make_basis(rng, d)
        mu = rng.normal(size=(n, d))
        rotated = rotate_prototypes(mu, b)
        f = rng.normal(size=d)
        got = soba_logits(f, rotated, b)
        oracle = np.empty(n)
        for k in range(n):
            coords = [sum(mu[k, i] * b.q[i, j] for i in range(d)) for j in range(d)]
            oracle[k] = sum(f[j] * coords[j] for j in range(d))
        assert np.allclose(got, oracle, atol=1e-9)
        assert not np.allclose(got, mu @ f)  # a non-identity basis must matter

    def test_normalized_prototypes(self, rng):
        d = 8
        b = self.make_basis(rng, d)
        mu = rng.normal(size=(3, d)) * [[1.0], [5.0], [0.2]]
        rotated = rotate_prototypes(mu, b)
        got = soba_logits(rng.normal(size=d), rotated, b, normalize_prototypes=True)
        assert np.all(np.abs(got) <= 1.0 + 1e-9)

    def test_truncated_prototypes_project_the_feature(self, rng):
        d, r = 8, 3
        b = construct_basis(
            CovarianceMatrix(values=np.diag(np.arange(d, 0, -1, dtype=float)), regularization_eps=0.0),
            rank_keep=r,
        )
        mu = rng.normal(size=(4, d))
        rotated = rotate_prototypes(mu, b, truncate=True)
        f = rng.normal(size=d)
        got = soba_logits(f, rotated, b)
        expected = rotated @ (f @ b.q[:, :r])
        assert np.allclose(got, expected, atol=1e-12)

    def test_bad_mode_and_dims(self, rng):
        b = self.make_basis(rng, 4)
        rotated = rotate_prototypes(rng.normal(size=(2, 4)), b)
        with pytest.raises(ValueError):
            soba_logits(np.ones(4), rotated, b, mode="sideways")
        with pytest.raises(DimensionMismatchError):
            soba_logits(np.ones(5), rotated, b)


class TestFuse:
    def test_alpha_zero_is_bitwise_zero_shot(self, rng):
        z = rng.normal(size=5)
        t = rng.normal(size=5)
        fused = fuse(z, t, FusionConfig(alpha=0.0))
        assert np.array_equal(fused, z)

    def test_hand_arithmetic(self):
        fused = fuse(np.array([0.1, 0.3]), np.array([0.2, 0.0]), FusionConfig(alpha=15.0))
        assert np.allclose(fused, [3.1, 0.3], atol=1e-12)

    def test_strong_disagreement_flips_argmax(self):
        z = np.array([0.30, 0.29])
        t = np.array([0.00, 0.01])
        fused = fuse(z, t, FusionConfig(alpha=15.0))
        assert np.allclose(fused, [0.30, 0.44], atol=1e-12)
        assert z.argmax() == 0 and fused.argmax() == 1

    def test_linear_in_alpha(self, rng):
        z, t = rng.normal(size=6), rng.normal(size=6)
        a1, a2 = 3.2, 7.9
        lhs = fuse(z, t, FusionConfig(alpha=a1 + a2))
        rhs = fuse(z, t, FusionConfig(alpha=a1)) + a2 * t
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fuse(np.ones(3), np.ones(4), FusionConfig())
