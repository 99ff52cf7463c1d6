"""Per-pseudo-class bounded sample cache selected by minimum prediction entropy.

Each class keeps at most ``capacity`` entries; once full, a new sample only
enters if its entropy is strictly below the current class maximum, evicting
that maximum. Ties on entropy resolve in favor of the earlier arrival, so the
final contents are exactly the K smallest (entropy, arrival) keys seen.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .core import softmax_entropy


class ArrivalOrderError(ValueError):
    """Arrival indices must be strictly increasing across updates."""


@dataclass(frozen=True)
class QueueEntry:
    feature: np.ndarray
    entropy: float
    arrival_index: int
    logits: np.ndarray


class DynamicQueue:
    """Entropy-bounded per-class cache (single stream writer).

    Entropy is computed internally from the sample's zero-shot logits with the
    queue's temperature, so stored entropies are always consistent with stored
    logits.
    """

    def __init__(self, n_classes: int, capacity: int, temperature: float = 100.0):
        if n_classes < 1:
            raise ValueError("need at least one class")
        if capacity < 1:
            raise ValueError("capacity must be a positive integer")
        if not temperature > 0:
            raise ValueError("temperature must be positive")
        self.n_classes = n_classes
        self.capacity = capacity
        self.temperature = temperature
        # per class: keys sorted ascending by (entropy, arrival), entries parallel
        self._keys = [[] for _ in range(n_classes)]
        self._entries = [[] for _ in range(n_classes)]
        self._last_arrival = -1

    def update(self, feature, label: int, logits, arrival: int) -> "DynamicQueue":
        """Insert one sample under its pseudo-label; returns the queue."""
        if not 0 <= label < self.n_classes:
            raise ValueError(f"label {label} outside [0, {self.n_classes})")
        if arrival <= self._last_arrival:
            raise ArrivalOrderError(
                f"arrival {arrival} not greater than last seen {self._last_arrival}"
            )
        self._last_arrival = arrival
        logits = np.asarray(logits, dtype=np.float64)
        h = softmax_entropy(logits, self.temperature)
        keys = self._keys[label]
        key = (h, arrival)
        if len(keys) < self.capacity:
            idx = bisect.bisect_left(keys, key)
        elif h < keys[-1][0]:
            keys.pop()
            self._entries[label].pop()
            idx = bisect.bisect_left(keys, key)
        else:
            return self  # rejected: not strictly below the class maximum
        keys.insert(idx, key)
        self._entries[label].insert(
            idx,
            QueueEntry(
                feature=np.array(feature, dtype=np.float64),
                entropy=h,
                arrival_index=arrival,
                logits=logits.copy(),
            ),
        )
        return self

    def class_members(self, k: int) -> list:
        """Entries of class ``k`` in ascending entropy order (stable by arrival)."""
        if not 0 <= k < self.n_classes:
            raise ValueError(f"class {k} outside [0, {self.n_classes})")
        return list(self._entries[k])

    def class_features(self, k: int) -> np.ndarray:
        """Stacked feature matrix for class ``k`` (may be empty)."""
        entries = self._entries[k]
        if not entries:
            return np.empty((0, 0))
        return np.stack([e.feature for e in entries])

    def occupancy(self) -> np.ndarray:
        return np.array([len(k) for k in self._keys], dtype=np.int64)

    @property
    def total_stored(self) -> int:
        return sum(len(k) for k in self._keys)

    def snapshot(self) -> dict:
        """JSON-ready debug dump: class index -> [{entropy, arrival_index}]."""
        return {
            str(k): [
                {"entropy": e.entropy, "arrival_index": e.arrival_index}
                for e in self._entries[k]
            ]
            for k in range(self.n_classes)
            if self._entries[k]
        }
