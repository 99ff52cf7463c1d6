"""Orthogonal basis from the covariance eigendecomposition, plus rotations.

The decomposition is post-processed into a deterministic form: eigenvalues
descending with a stable tie-break on the original index, and each column
signed so its largest-magnitude entry is nonnegative. Runs on identical input
therefore reproduce bit-identical bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError
from .stats import CovarianceMatrix, PrototypeSet


class BasisFailureError(RuntimeError):
    """Decomposition failed (non-finite input or LAPACK error)."""


@dataclass(frozen=True)
class RotationBasis:
    q: np.ndarray                # (d, d), columns are basis vectors
    singular_values: np.ndarray  # (d,), descending, >= 0
    rank_keep: int

    @property
    def dim(self) -> int:
        return self.q.shape[0]


def construct_basis(cov: CovarianceMatrix, rank_keep: int | None = None) -> RotationBasis:
    """Eigendecompose a symmetric PSD covariance into a deterministic basis."""
    values = cov.values if isinstance(cov, CovarianceMatrix) else np.asarray(cov)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise BasisFailureError(f"covariance must be square, got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise BasisFailureError("covariance contains non-finite entries")
    d = values.shape[0]
    if rank_keep is None:
        rank_keep = d
    if not 1 <= rank_keep <= d:
        raise ValueError(f"rank_keep {rank_keep} outside [1, {d}]")
    try:
        eigvals, eigvecs = np.linalg.eigh(values)
    except np.linalg.LinAlgError as exc:
        raise BasisFailureError(f"eigendecomposition failed: {exc}") from exc
    # descending order, stable on the original index for exact ties
    order = np.argsort(-eigvals, kind="stable")
    eigvals = np.maximum(eigvals[order], 0.0)
    q = eigvecs[:, order]
    # sign convention: largest-magnitude entry of each column is nonnegative
    anchor = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[anchor, np.arange(d)])
    signs[signs == 0] = 1.0
    q = q * signs
    return RotationBasis(q=q, singular_values=eigvals, rank_keep=int(rank_keep))


def _rotation_columns(basis: RotationBasis, truncate: bool) -> np.ndarray:
    if truncate and basis.rank_keep < basis.dim:
        return basis.q[:, : basis.rank_keep]
    return basis.q


def rotate_prototypes(prototypes, basis: RotationBasis, truncate: bool = False) -> np.ndarray:
    """Project prototype rows onto the basis columns: row k becomes <mu_k, q_j>."""
    means = prototypes.means if isinstance(prototypes, PrototypeSet) else np.asarray(prototypes)
    if means.ndim != 2 or means.shape[1] != basis.dim:
        raise DimensionMismatchError(
            f"prototype dim {means.shape} vs basis dim {basis.dim}"
        )
    return means @ _rotation_columns(basis, truncate)


def rotate_feature(feature, basis: RotationBasis, truncate: bool = False) -> np.ndarray:
    """Project one feature onto the basis columns (diagnostic symmetric mode)."""
    f = np.asarray(feature, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != basis.dim:
        raise DimensionMismatchError(f"feature dim {f.shape} vs basis dim {basis.dim}")
    return f @ _rotation_columns(basis, truncate)
