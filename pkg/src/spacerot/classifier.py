"""Classifier heads (zero-shot, NCM, L1/L2, rotated-prototype) and logit fusion."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatchError
from .basis import RotationBasis, rotate_feature
from .stats import PrototypeSet

HEADS = ("zeroshot", "ncm", "l1", "l2", "soba", "baseline")
MODES = ("prototype_only", "symmetric")


class ZeroNormPrototypeWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FusionConfig:
    """Fusion weight, head selection and prototype normalization flag."""

    alpha: float = 15.0
    head: str = "soba"
    normalize_prototypes: bool = False

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {self.head!r}")


def _check_dims(f: np.ndarray, means: np.ndarray):
    if f.ndim != 1 or means.ndim != 2 or f.shape[0] != means.shape[1]:
        raise DimensionMismatchError(
            f"feature dim {f.shape} vs prototype dim {means.shape}"
        )


def ncm_logits(feature, prototypes: PrototypeSet) -> np.ndarray:
    """Cosine similarity of the feature to each class mean.

    A zero-norm prototype scores -1 (worst possible) and raises a warning.
    """
    means = prototypes.means if isinstance(prototypes, PrototypeSet) else np.asarray(prototypes)
    f = np.asarray(feature, dtype=np.float64)
    _check_dims(f, means)
    norms = np.linalg.norm(means, axis=1)
    fnorm = float(np.linalg.norm(f))
    zero = norms == 0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} zero-norm prototype(s); scoring them -1",
            ZeroNormPrototypeWarning,
        )
    safe = np.where(zero, 1.0, norms) * (fnorm if fnorm > 0 else 1.0)
    values = (means @ f) / safe
    values[zero] = -1.0
    return values


def distance_logits(feature, prototypes: PrototypeSet, metric: str) -> np.ndarray:
    """Negated L1 or L2 distance to each class mean (argmax = nearest)."""
    means = prototypes.means if isinstance(prototypes, PrototypeSet) else np.asarray(prototypes)
    f = np.asarray(feature, dtype=np.float64)
    _check_dims(f, means)
    diff = means - f
    if metric == "l1":
        return -np.abs(diff).sum(axis=1)
    if metric == "l2":
        return -np.sqrt((diff * diff).sum(axis=1))
    raise ValueError(f"metric must be 'l1' or 'l2', got {metric!r}")


def soba_logits(
    feature,
    rotated: np.ndarray,
    basis: RotationBasis,
    mode: str = "prototype_only",
    normalize_prototypes: bool = False,
) -> np.ndarray:
    """Inner products against rotated prototypes.

    prototype_only (default): the raw feature meets the rotated prototypes.
    symmetric: the feature is rotated as well, which at full rank provably
    reproduces the unrotated inner products (diagnostic mode). If the rotated
    matrix was rank-truncated, the feature is projected onto the same columns
    so the inner product is taken in the kept subspace.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    rot = np.asarray(rotated, dtype=np.float64)
    f = np.asarray(feature, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != basis.dim:
        raise DimensionMismatchError(f"feature dim {f.shape} vs basis dim {basis.dim}")
    if rot.ndim != 2 or rot.shape[1] not in (basis.dim, basis.rank_keep):
        raise DimensionMismatchError(
            f"rotated prototypes {rot.shape} inconsistent with basis dim "
            f"{basis.dim} / rank {basis.rank_keep}"
        )
    truncated = rot.shape[1] != basis.dim
    if mode == "symmetric" or truncated:
        query = rotate_feature(f, basis, truncate=truncated)
    else:
        query = f
    if normalize_prototypes:
        norms = np.linalg.norm(rot, axis=1)
        rot = rot / np.where(norms == 0, 1.0, norms)[:, None]
    return rot @ query


def fuse(zero_shot, trans, cfg: FusionConfig) -> np.ndarray:
    """Fused logits: zero_shot + alpha * trans (bitwise zero_shot at alpha=0)."""
    z = np.asarray(zero_shot, dtype=np.float64)
    t = np.asarray(trans, dtype=np.float64)
    if z.shape != t.shape:
        raise DimensionMismatchError(f"logit shapes differ: {z.shape} vs {t.shape}")
    if cfg.alpha == 0.0:
        return z.copy()
    return z + cfg.alpha * t
