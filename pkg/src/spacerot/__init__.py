"""Streaming test-time adaptation with covariance-eigenbasis prototype rotation.

The engine consumes a stream of precomputed unit-norm image embeddings,
scores them against fixed class text embeddings, caches the most confident
samples per pseudo-class in a bounded queue, and periodically rebuilds an
orthogonal basis from the pooled class-conditional covariance. Class
prototypes rotated into that basis drive a second classifier head whose
logits are fused with the zero-shot scores.
"""

from .core import TextWeights, inner_logits, softmax, entropy, one_hot_argmax
from .queue import DynamicQueue, QueueEntry
from .stats import PrototypeSet, CovarianceMatrix, class_means, pooled_covariance
from .basis import RotationBasis, construct_basis, rotate_prototypes, rotate_feature
from .classifier import FusionConfig, ncm_logits, distance_logits, soba_logits, fuse
from .engine import RefreshSchedule, RunMetrics, StreamRunner, run_stream, refresh, evaluate
from .synth import SynthConfig, REF1, generate, shift_stream

__version__ = "0.1.0"

__all__ = [
    "TextWeights", "inner_logits", "softmax", "entropy", "one_hot_argmax",
    "DynamicQueue", "QueueEntry",
    "PrototypeSet", "CovarianceMatrix", "class_means", "pooled_covariance",
    "RotationBasis", "construct_basis", "rotate_prototypes", "rotate_feature",
    "FusionConfig", "ncm_logits", "distance_logits", "soba_logits", "fuse",
    "RefreshSchedule", "RunMetrics", "StreamRunner", "run_stream", "refresh", "evaluate",
    "SynthConfig", "REF1", "generate", "shift_stream",
]
