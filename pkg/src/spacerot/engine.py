"""Streaming testing loop: score, queue, checkpointed refresh, fuse, evaluate.

Per sample: zero-shot logits, pseudo-label, queue update; when the sample
completes a refresh checkpoint the statistics/basis/prototypes are rebuilt
from the queue as it stands after that update, and from then on the cached
snapshot feeds the transformed head whose logits fuse with the zero-shot
scores. Until the first successful refresh every prediction is pure
zero-shot. The loop is sequential and fully deterministic.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import TextWeights, DimensionMismatchError, softmax_entropy
from .queue import DynamicQueue
from .stats import (
    PrototypeSet,
    CovarianceMatrix,
    InsufficientStatisticsError,
    class_means,
    pooled_covariance,
)
from .basis import RotationBasis, BasisFailureError, construct_basis, rotate_prototypes
from .classifier import FusionConfig, fuse


@dataclass(frozen=True)
class RefreshSchedule:
    """When to rebuild statistics: every fraction of the stream, or fixed interval."""

    mode: str = "fraction"
    fraction: float = 0.1
    interval: int = 1000
    total_hint: int | None = None

    def __post_init__(self):
        if self.mode not in ("fraction", "interval"):
            raise ValueError(f"mode must be 'fraction' or 'interval', got {self.mode!r}")
        if self.mode == "fraction" and not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.mode == "interval" and self.interval < 1:
            raise ValueError("interval must be a positive integer")

    def boundaries(self, total: int | None = None) -> list[int]:
        """Sorted sample counts after which a refresh happens (fraction mode)."""
        if self.mode == "interval":
            raise ValueError("interval mode has no precomputed boundaries")
        t = total if total is not None else self.total_hint
        if t is None:
            raise ValueError("fraction mode requires total_hint")
        marks = set()
        for i in range(1, int(1 / self.fraction) + 2):
            v = i * self.fraction * t
            # guard against float dust pushing an exact multiple past its ceil
            marks.add(max(1, math.ceil(v - 1e-9 * max(1.0, v))))
        return sorted(m for m in marks if m <= t)


@dataclass
class RunMetrics:
    samples_seen: int = 0
    labeled_seen: int = 0
    top1_correct: int = 0
    zeroshot_correct: int = 0
    refresh_count: int = 0
    refresh_skipped: int = 0
    scoring_seconds: float = 0.0
    refresh_seconds: float = 0.0
    head: str = "soba"
    occupancy_histogram: list = field(default_factory=list)
    total_stored: int = 0

    def accuracy(self) -> dict:
        if self.labeled_seen == 0:
            return {"zeroshot": None, "fused": None}
        return {
            "zeroshot": self.zeroshot_correct / self.labeled_seen,
            "fused": self.top1_correct / self.labeled_seen,
        }

    def to_dict(self) -> dict:
        return {
            "samples_seen": self.samples_seen,
            "labeled_seen": self.labeled_seen,
            "top1_correct": self.top1_correct,
            "zeroshot_correct": self.zeroshot_correct,
            "accuracy": self.accuracy(),
            "refresh_count": self.refresh_count,
            "refresh_skipped": self.refresh_skipped,
            "head": self.head,
            "wall_time": {
                "scoring_s": self.scoring_seconds,
                "refresh_s": self.refresh_seconds,
                "total_s": self.scoring_seconds + self.refresh_seconds,
            },
            "queue_occupancy": {
                "histogram": list(self.occupancy_histogram),
                "total_stored": self.total_stored,
            },
        }


@dataclass(frozen=True)
class StepResult:
    prediction: int
    zeroshot_prediction: int
    entropy: float
    refreshed: bool
    warmup: bool


def refresh(
    queue: DynamicQueue,
    weights: TextWeights,
    rank_keep: int | None = None,
    strict_covariance_normalization: bool = False,
):
    """Means -> pooled covariance -> basis -> rotated prototypes, one snapshot."""
    protos = class_means(queue, weights)
    cov = pooled_covariance(
        queue, protos, strict_class_normalization=strict_covariance_normalization
    )
    basis = construct_basis(cov, rank_keep=rank_keep)
    truncate = rank_keep is not None and rank_keep < basis.dim
    rotated = rotate_prototypes(protos, basis, truncate=truncate)
    return protos, cov, basis, rotated


class StreamRunner:
    """Stateful one-sample-at-a-time adaptation loop."""

    def __init__(
        self,
        weights: TextWeights,
        fusion: FusionConfig | None = None,
        schedule: RefreshSchedule | None = None,
        capacity: int = 16,
        temperature: float = 100.0,
        mode: str = "prototype_only",
        rank_keep: int | None = None,
        strict_covariance_normalization: bool = False,
    ):
        self.weights = weights
        self.fusion = fusion or FusionConfig()
        self.schedule = schedule or RefreshSchedule()
        self.capacity = capacity
        self.temperature = temperature
        self.mode = mode
        self.rank_keep = rank_keep
        self.strict_covariance_normalization = strict_covariance_normalization
        self._w = np.ascontiguousarray(weights.matrix)
        self.queue = DynamicQueue(weights.n_classes, capacity, temperature)
        self.metrics = RunMetrics(head=self.fusion.head)
        self.prototypes: PrototypeSet | None = None
        self.covariance: CovarianceMatrix | None = None
        self.basis: RotationBasis | None = None
        self.rotated: np.ndarray | None = None
        self._head_matrix: np.ndarray | None = None  # cached scoring matrix
        self._query_columns: np.ndarray | None = None
        if self.schedule.mode == "fraction":
            self._boundaries = self.schedule.boundaries()
            self._next_boundary = 0
        else:
            self._boundaries = None

    # -- checkpoint arithmetic ------------------------------------------------
    def _is_checkpoint(self, count: int) -> bool:
        if self.schedule.mode == "interval":
            return count % self.schedule.interval == 0
        while (
            self._next_boundary < len(self._boundaries)
            and self._boundaries[self._next_boundary] < count
        ):
            self._next_boundary += 1
        if (
            self._next_boundary < len(self._boundaries)
            and self._boundaries[self._next_boundary] == count
        ):
            self._next_boundary += 1
            return True
        return False

    # -- refresh --------------------------------------------------------------
    def _try_refresh(self) -> bool:
        t0 = time.perf_counter()
        try:
            protos, cov, basis, rotated = refresh(
                self.queue,
                self.weights,
                rank_keep=self.rank_keep,
                strict_covariance_normalization=self.strict_covariance_normalization,
            )
        except (InsufficientStatisticsError, BasisFailureError):
            self.metrics.refresh_skipped += 1
            self.metrics.refresh_seconds += time.perf_counter() - t0
            return False
        self.prototypes = protos
        self.covariance = cov
        self.basis = basis
        self.rotated = rotated
        self._rebuild_head_cache()
        self.metrics.refresh_count += 1
        self.metrics.refresh_seconds += time.perf_counter() - t0
        return True

    def _rebuild_head_cache(self):
        head = self.fusion.head
        self._query_columns = None
        if head in ("ncm", "baseline"):
            norms = np.linalg.norm(self.prototypes.means, axis=1)
            self._head_matrix = self.prototypes.means / np.where(norms == 0, 1.0, norms)[:, None]
            self._zero_norm = norms == 0
        elif head == "soba":
            mat = self.rotated
            if self.fusion.normalize_prototypes:
                norms = np.linalg.norm(mat, axis=1)
                mat = mat / np.where(norms == 0, 1.0, norms)[:, None]
            self._head_matrix = np.ascontiguousarray(mat)
            truncated = self.rotated.shape[1] != self.basis.dim
            if self.mode == "symmetric" or truncated:
                cols = self.basis.q[:, : self.rotated.shape[1]] if truncated else self.basis.q
                self._query_columns = np.ascontiguousarray(cols)
        elif head in ("l1", "l2"):
            self._head_matrix = np.ascontiguousarray(self.prototypes.means)
        else:  # zeroshot
            self._head_matrix = None

    def _trans_logits(self, feature: np.ndarray) -> np.ndarray:
        head = self.fusion.head
        if head in ("ncm", "baseline"):
            values = self._head_matrix @ feature
            if np.any(self._zero_norm):
                values[self._zero_norm] = -1.0
            return values
        if head == "soba":
            query = feature if self._query_columns is None else feature @ self._query_columns
            return self._head_matrix @ query
        diff = self._head_matrix - feature
        if head == "l1":
            return -np.abs(diff).sum(axis=1)
        return -np.sqrt((diff * diff).sum(axis=1))

    # -- per-sample step -------------------------------------------------------
    def step(self, feature, label: int | None = None) -> StepResult:
        t0 = time.perf_counter()
        f = np.asarray(feature, dtype=np.float64)
        if f.ndim != 1 or f.shape[0] != self.weights.dim:
            raise DimensionMismatchError(
                f"feature dim {f.shape} vs expected {self.weights.dim}"
            )
        zs = self._w @ f
        pseudo = int(np.argmax(zs))
        h = softmax_entropy(zs, self.temperature)
        arrival = self.metrics.samples_seen
        self.queue.update(f, pseudo, zs, arrival)
        count = arrival + 1
        self.metrics.samples_seen = count
        self.metrics.scoring_seconds += time.perf_counter() - t0

        refreshed = False
        if self._is_checkpoint(count):
            refreshed = self._try_refresh()

        t1 = time.perf_counter()
        warmup = self.basis is None
        if warmup or self.fusion.head == "zeroshot":
            prediction = pseudo
        else:
            logits = fuse(zs, self._trans_logits(f), self.fusion)
            prediction = int(np.argmax(logits))
        if label is not None and label >= 0:
            self.metrics.labeled_seen += 1
            if prediction == label:
                self.metrics.top1_correct += 1
            if pseudo == label:
                self.metrics.zeroshot_correct += 1
        self.metrics.scoring_seconds += time.perf_counter() - t1
        return StepResult(
            prediction=prediction,
            zeroshot_prediction=pseudo,
            entropy=h,
            refreshed=refreshed,
            warmup=warmup,
        )

    def finalize_metrics(self) -> RunMetrics:
        occ = self.queue.occupancy()
        hist = np.bincount(occ, minlength=self.capacity + 1)
        self.metrics.occupancy_histogram = hist.tolist()
        self.metrics.total_stored = int(occ.sum())
        return self.metrics


def run_stream(
    features,
    weights: TextWeights,
    labels=None,
    fusion: FusionConfig | None = None,
    schedule: RefreshSchedule | None = None,
    capacity: int = 16,
    temperature: float = 100.0,
    mode: str = "prototype_only",
    rank_keep: int | None = None,
    strict_covariance_normalization: bool = False,
):
    """Process an ordered block of features; returns (metrics, predictions).

    ``predictions`` holds aligned arrays: fused_pred, zeroshot_pred, entropy.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise DimensionMismatchError(f"expected (samples, dim) features, got {feats.shape}")
    total = feats.shape[0]
    sched = schedule or RefreshSchedule()
    if sched.mode == "fraction" and sched.total_hint is None:
        sched = RefreshSchedule(mode="fraction", fraction=sched.fraction, total_hint=total)
    runner = StreamRunner(
        weights,
        fusion=fusion,
        schedule=sched,
        capacity=capacity,
        temperature=temperature,
        mode=mode,
        rank_keep=rank_keep,
        strict_covariance_normalization=strict_covariance_normalization,
    )
    lab = None
    if labels is not None:
        lab = np.asarray(labels, dtype=np.int64)
        if lab.shape != (total,):
            raise DimensionMismatchError(f"{lab.shape} labels for {total} samples")
    fused_pred = np.empty(total, dtype=np.int64)
    zero_pred = np.empty(total, dtype=np.int64)
    entropies = np.empty(total, dtype=np.float64)
    for t in range(total):
        try:
            result = runner.step(feats[t], None if lab is None else int(lab[t]))
        except DimensionMismatchError as exc:
            raise DimensionMismatchError(f"sample {t}: {exc}") from exc
        fused_pred[t] = result.prediction
        zero_pred[t] = result.zeroshot_prediction
        entropies[t] = result.entropy
    metrics = runner.finalize_metrics()
    predictions = {
        "fused_pred": fused_pred,
        "zeroshot_pred": zero_pred,
        "entropy": entropies,
    }
    return metrics, predictions


def evaluate(predictions: dict, labels=None) -> dict:
    """Top-1 accuracy per head plus sparse confusion counts for the fused head."""
    fused = np.asarray(predictions["fused_pred"])
    report: dict = {"samples": int(fused.size)}
    counts: dict = {}
    for p in fused.tolist():
        counts[p] = counts.get(p, 0) + 1
    report["prediction_counts"] = {str(k): v for k, v in sorted(counts.items())}
    if labels is None:
        report["accuracy"] = {name: None for name in predictions if name.endswith("_pred")}
        report["confusion"] = None
        return report
    lab = np.asarray(labels)
    if lab.shape != fused.shape:
        raise DimensionMismatchError(f"{lab.shape} labels for {fused.shape} predictions")
    known = lab >= 0
    denom = int(known.sum())
    accuracy = {}
    for name, arr in predictions.items():
        if not name.endswith("_pred"):
            continue
        arr = np.asarray(arr)
        accuracy[name] = float((arr[known] == lab[known]).mean()) if denom else None
    pairs: dict = {}
    for t, p in zip(lab[known].tolist(), fused[known].tolist()):
        pairs[(t, p)] = pairs.get((t, p), 0) + 1
    report["accuracy"] = accuracy
    report["confusion"] = [[t, p, c] for (t, p), c in sorted(pairs.items())]
    return report
