"""Exploration reward terms: post-contact novelty, pre-contact energy
pull, and the episodic-progress scaling that pays only improvements.

All functions here are pure; the per-episode running maxima live in
EpisodeRewardTracker instances owned by whoever steps the environment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .coverage import count_weight
from .geometry import (SurfacePoint, directional_weights, normals_of,
                       positions_of, ray_box_occluded)

Array = np.ndarray


@dataclass
class RewardConfig:
    """Scales and switches for the exploration terms.

    energy_decay None means "derive from the object": 0.1 x the object's
    bounding-box diagonal, resolved where the object points are known.
    """

    contact_scale: float = 200.0
    energy_scale: float = 1.28
    energy_decay: float | None = None
    use_directional: bool = False
    use_occlusion: bool = True

    def __post_init__(self):
        if self.contact_scale < 0 or self.energy_scale < 0:
            raise ValueError("reward scales must be nonnegative")
        if self.energy_decay is not None and self.energy_decay <= 0:
            raise ValueError("energy_decay must be positive")


def default_energy_decay(object_points) -> float:
    pos = positions_of(object_points)
    diag = float(np.linalg.norm(pos.max(axis=0) - pos.min(axis=0)))
    if diag <= 0:
        raise ValueError("degenerate object: bounding box has zero diagonal")
    return 0.1 * diag


@dataclass
class EpisodeRewardTracker:
    """Running episodic maxima of the raw exploration rewards."""

    contact_max: float = 0.0
    energy_max: float = 0.0

    def reset(self):
        self.contact_max = 0.0
        self.energy_max = 0.0


def contact_reward(events, counter, s: int, n_fingers: int) -> float:
    """Average novelty weight over fingers currently in contact.

    The counter must already hold this step's increments; the reward
    reads the post-increment counts (so a first-ever contact pays
    g(1) = 1/sqrt(2), not g(0)).
    """
    if n_fingers < 1:
        raise ValueError("n_fingers must be >= 1")
    total = 0.0
    for ev in events:
        if ev.in_contact:
            c = counter.counts(s)[ev.finger, ev.region]
            total += float(count_weight(c))
    return total / n_fingers


def finger_energy(keypoint: SurfacePoint, object_points, region_map, counter,
                  s: int, f: int, config: RewardConfig, occluders=()) -> float:
    """Energy pull of the object on one finger keypoint.

    Sum over surface points of novelty weight (by the point's region),
    optional facing weight, optional occlusion gate, and exponential
    distance decay. High when unvisited regions are close and visible.
    """
    pos = positions_of(object_points)
    nrm = normals_of(object_points)
    decay = config.energy_decay
    if decay is None:
        decay = default_energy_decay(pos)
    counts = counter.counts(s)[f]
    w = count_weight(counts)[np.asarray(region_map.labels)]
    if config.use_directional:
        w = w * directional_weights(keypoint.position, keypoint.normal, pos, nrm)
    if config.use_occlusion:
        for m in range(pos.shape[0]):
            if w[m] == 0.0:
                continue
            for box in occluders:
                if ray_box_occluded(keypoint.position, pos[m], box):
                    w[m] = 0.0
                    break
    phi = kernels.energy_sum_numpy(keypoint.position[None, :], pos[None, :, :],
                                   np.asarray(w)[None, :], decay)
    return float(phi[0])


def energy_reward(finger_energies) -> float:
    """Mean energy over fingers."""
    vals = np.asarray(finger_energies, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("energy_reward needs at least one finger energy")
    return float(vals.mean())


def scale_progress(r: float, running_max: float, coefficient: float):
    """Pay only improvement over the episodic max: (scaled, new_max)."""
    scaled = coefficient * max(r - running_max, 0.0)
    return scaled, max(running_max, r)


def scale_progress_batch(r: Array, running_max: Array, coefficient: float):
    """Vectorized scale_progress over environment batches."""
    scaled = coefficient * np.maximum(r - running_max, 0.0)
    return scaled, np.maximum(running_max, r)


def total_reward(task: float, scaled_contact: float, scaled_energy: float) -> float:
    return task + scaled_contact + scaled_energy
