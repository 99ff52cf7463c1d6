"""Empirical class means and the pooled (shared) within-class covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TextWeights
from .queue import DynamicQueue


class InsufficientStatisticsError(RuntimeError):
    """Every class queue is empty; no covariance can be formed."""


@dataclass(frozen=True)
class PrototypeSet:
    """Per-class mean features; empty classes fall back to text rows."""

    means: np.ndarray          # (N, d)
    support: np.ndarray        # (N,) samples contributing per class
    fallback_mask: np.ndarray  # (N,) True where the text row was substituted

    @property
    def n_classes(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class CovarianceMatrix:
    values: np.ndarray
    regularization_eps: float


def class_means(queue: DynamicQueue, weights: TextWeights) -> PrototypeSet:
    """Arithmetic mean of each class queue; text-embedding fallback when empty."""
    n = weights.n_classes
    if queue.n_classes != n:
        raise ValueError(
            f"queue has {queue.n_classes} classes, weights have {n}"
        )
    d = weights.dim
    means = np.zeros((n, d))
    support = np.zeros(n, dtype=np.int64)
    fallback = np.zeros(n, dtype=bool)
    for k in range(n):
        feats = queue.class_features(k)
        if feats.size:
            means[k] = feats.mean(axis=0)
            support[k] = feats.shape[0]
        else:
            means[k] = weights.matrix[k]
            fallback[k] = True
    return PrototypeSet(means=means, support=support, fallback_mask=fallback)


def pooled_covariance(
    queue: DynamicQueue,
    prototypes: PrototypeSet,
    strict_class_normalization: bool = False,
    eps_scale: float = 1e-6,
    eps_floor: float = 1e-12,
) -> CovarianceMatrix:
    """Average of per-class covariances, then ridge-regularized.

    The outer average runs over populated classes only; pass
    ``strict_class_normalization=True`` to divide by the full class count
    instead (deflates the matrix while many classes are still empty).
    """
    n = prototypes.n_classes
    d = prototypes.means.shape[1]
    blocks = []
    populated = 0
    for k in range(n):
        feats = queue.class_features(k)
        if not feats.size:
            continue
        centered = feats - prototypes.means[k]
        # scaling rows by 1/sqrt(M_k) folds the per-class average into one product
        blocks.append(centered / np.sqrt(feats.shape[0]))
        populated += 1
    if populated == 0:
        raise InsufficientStatisticsError("all class queues are empty")
    stacked = np.vstack(blocks)
    cov = stacked.T @ stacked
    cov /= n if strict_class_normalization else populated
    eps = max(eps_scale * float(np.trace(cov)) / d, eps_floor)
    cov[np.diag_indices(d)] += eps
    return CovarianceMatrix(values=cov, regularization_eps=eps)
