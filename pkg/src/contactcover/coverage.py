"""Contact matching, contact detection, and the coverage counter.

The counter is the core bookkeeping object: a table of nonnegative
integer matrices, one (finger x region) matrix per discrete state
cluster, counting how often each finger has contacted each surface
region while the object was in that cluster. Counts only ever grow and
are never reset within a training run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import positions_of

Array = np.ndarray


@dataclass
class ContactEvent:
    """One finger's closest-pair contact candidate for one step."""

    finger: int
    keypoint: int
    surface_point: int
    region: int
    distance: float
    force: float
    in_contact: bool

    def __post_init__(self):
        if self.distance < 0 or self.force < 0:
            raise ValueError("distance and force must be nonnegative")


class CoverageCounter:
    """Lazy table of per-state-cluster (finger x region) contact counts."""

    def __init__(self, n_fingers: int, n_regions: int):
        if n_fingers < 1 or n_regions < 1:
            raise ValueError("need at least one finger and one region")
        self.n_fingers = int(n_fingers)
        self.n_regions = int(n_regions)
        self.table: dict = {}
        self._zeros = np.zeros((self.n_fingers, self.n_regions), dtype=np.int64)
        self._zeros.setflags(write=False)

    def counts(self, s: int) -> Array:
        """(F, K) counts for state cluster s; a shared zero matrix if the
        cluster was never touched. Treat the result as read-only."""
        return self.table.get(int(s), self._zeros)

    def increment(self, s: int, f: int, k: int) -> int:
        """Add one contact for (s, f, k); returns the post-increment count."""
        if not 0 <= f < self.n_fingers:
            raise ValueError(f"finger index {f} out of range [0, {self.n_fingers})")
        if not 0 <= k < self.n_regions:
            raise ValueError(f"region index {k} out of range [0, {self.n_regions})")
        s = int(s)
        slice_ = self.table.get(s)
        if slice_ is None:
            slice_ = np.zeros((self.n_fingers, self.n_regions), dtype=np.int64)
            self.table[s] = slice_
        slice_[f, k] += 1
        return int(slice_[f, k])

    @property
    def n_states(self) -> int:
        return len(self.table)

    def nonzero_entries(self) -> int:
        """Number of (s, f, k) entries that have counted at least one contact."""
        return int(sum(np.count_nonzero(m) for m in self.table.values()))

    def total_contacts(self) -> int:
        return int(sum(m.sum() for m in self.table.values()))

    def iter_entries(self):
        """(s, f, k, count) for every nonzero entry, sorted for stable export."""
        for s in sorted(self.table):
            m = self.table[s]
            for f, k in zip(*np.nonzero(m)):
                yield s, int(f), int(k), int(m[f, k])

    def to_state(self) -> dict:
        keys = np.array(sorted(self.table), dtype=np.int64)
        stack = (np.stack([self.table[int(s)] for s in keys])
                 if keys.size else np.zeros((0, self.n_fingers, self.n_regions), np.int64))
        return {"counter_keys": keys, "counter_values": stack}

    @classmethod
    def from_state(cls, n_fingers: int, n_regions: int, state: dict) -> "CoverageCounter":
        counter = cls(n_fingers, n_regions)
        for s, m in zip(state["counter_keys"], state["counter_values"]):
            counter.table[int(s)] = np.array(m, dtype=np.int64)
        return counter


def contact_match(finger_keypoints, object_points):
    """Closest (keypoint, object point) pair as (l, m, distance).

    Exhaustive over all pairs; exact ties go to the lowest keypoint
    index, then the lowest object point index.
    """
    kp = positions_of(finger_keypoints)
    op = positions_of(object_points)
    if kp.shape[0] == 0 or op.shape[0] == 0:
        raise ValueError("contact_match needs nonempty point lists")
    d = np.linalg.norm(kp[:, None, :] - op[None, :, :], axis=2)
    l, m = np.unravel_index(np.argmin(d), d.shape)
    return int(l), int(m), float(d[l, m])


def detect_contact(distance, force, dist_threshold: float, force_threshold: float):
    """Contact iff geometrically close AND physically pressed.

    Works elementwise on arrays; returns bool (or bool array).
    """
    return (distance < dist_threshold) & (force > force_threshold)


def count_weight(c):
    """Novelty weight g(c) = 1/sqrt(c + 1); 1.0 at zero, strictly decreasing."""
    return 1.0 / np.sqrt(np.asarray(c, dtype=np.float64) + 1.0)
