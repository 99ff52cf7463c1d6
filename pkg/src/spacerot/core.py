"""Elementary vector operations shared by every other module.

All arithmetic is float64; 32-bit precision exists only in the file format
(see streamio). Features and text rows are unit-norm after ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_NORM_TOL = 1e-4
STRICT_NORM_RANGE = (0.99, 1.01)


class DimensionMismatchError(ValueError):
    """Raised when vector/matrix dimensions disagree; message reports both."""


class InvalidValueError(ValueError):
    """Raised on non-finite, negative-probability or empty inputs."""


def _as_float64(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidValueError("input contains non-finite entries")
    return arr


def ingest_feature(values, strict: bool = False) -> np.ndarray:
    """Validate and unit-normalize one embedding vector.

    Default mode re-normalizes whatever arrives; strict mode rejects vectors
    whose norm falls outside [0.99, 1.01] before normalizing.
    """
    vec = _as_float64(values)
    if vec.ndim != 1 or vec.size == 0:
        raise InvalidValueError("feature must be a non-empty 1-d vector")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise InvalidValueError("feature has zero norm")
    if strict and not (STRICT_NORM_RANGE[0] <= norm <= STRICT_NORM_RANGE[1]):
        raise InvalidValueError(
            f"strict ingestion: norm {norm:.6f} outside {STRICT_NORM_RANGE}"
        )
    return vec / norm


@dataclass(frozen=True)
class TextWeights:
    """Class text embeddings: one unit-norm row per class plus class names."""

    matrix: np.ndarray
    class_names: tuple = field(default=())

    def __post_init__(self):
        mat = _as_float64(self.matrix)
        if mat.ndim != 2:
            raise InvalidValueError("text weights must be a 2-d matrix")
        n, d = mat.shape
        if n < 2:
            raise InvalidValueError(f"need at least 2 classes, got {n}")
        names = tuple(self.class_names) if self.class_names else tuple(
            f"class_{i}" for i in range(n)
        )
        if len(names) != n:
            raise DimensionMismatchError(
                f"{len(names)} class names for {n} weight rows"
            )
        if len(set(names)) != n:
            raise InvalidValueError("duplicate class names")
        norms = np.linalg.norm(mat, axis=1)
        if np.any(norms == 0):
            raise InvalidValueError("zero-norm text row")
        mat = mat / norms[:, None]
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "class_names", names)

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def inner_logits(feature: np.ndarray, weights) -> np.ndarray:
    """Inner product of one feature against every class row."""
    mat = weights.matrix if isinstance(weights, TextWeights) else np.asarray(weights)
    f = np.asarray(feature, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != mat.shape[1]:
        raise DimensionMismatchError(
            f"feature dim {f.shape} vs weight columns {mat.shape[1]}"
        )
    return mat @ f


def softmax(logits, temperature: float = 1.0) -> np.ndarray:
    """Stable softmax of ``temperature * logits``.

    ``temperature`` is a sharpening scale (the CLIP logit-scale convention):
    larger values concentrate the distribution. Must be positive.
    """
    if not temperature > 0:
        raise InvalidValueError(f"temperature must be positive, got {temperature}")
    scaled = _as_float64(logits) * temperature
    if scaled.size == 0:
        raise InvalidValueError("empty logits")
    shifted = scaled - scaled.max()
    ex = np.exp(shifted)
    return ex / ex.sum()


def entropy(probabilities) -> float:
    """Shannon entropy in nats with the 0*log(0) = 0 convention."""
    p = _as_float64(probabilities)
    if np.any(p < 0):
        raise InvalidValueError("negative probability entry")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def one_hot_argmax(logits) -> int:
    """Index of the largest logit; ties break to the lowest index."""
    arr = _as_float64(logits)
    if arr.size == 0:
        raise InvalidValueError("empty logits")
    return int(np.argmax(arr))


def softmax_entropy(logits: np.ndarray, temperature: float) -> float:
    """Entropy of softmax(logits, temperature) in one stable pass.

    Equivalent to entropy(softmax(...)) but avoids forming log(0); used on
    the per-sample hot path.
    """
    scaled = logits * temperature
    m = scaled.max()
    ex = np.exp(scaled - m)
    s = ex.sum()
    return float(np.log(s) - (ex @ (scaled - m)) / s)
