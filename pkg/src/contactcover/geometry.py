"""Surface-point sampling, region clustering, rigid transforms, and
visibility tests shared by the reward pipeline.

Conventions: positions are metric numpy vectors (2D or 3D), normals are
unit vectors pointing out of the object, rotations are orthonormal
matrices acting on column vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

Array = np.ndarray

_UNIT_TOL = 1e-6
_ORTHO_TOL = 1e-6


def _vec(x, name: str) -> Array:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] not in (2, 3):
        raise ValueError(f"{name} must be a 2D or 3D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def _check_rotation(r: Array) -> Array:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"rotation must be square, got shape {r.shape}")
    if not np.allclose(r.T @ r, np.eye(r.shape[0]), atol=_ORTHO_TOL):
        raise ValueError("rotation matrix is not orthonormal")
    return r


@dataclass(frozen=True)
class SurfacePoint:
    """A sampled point on an object (or hand) surface with outward normal."""

    position: Array
    normal: Array

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position, "position"))
        n = _vec(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
            raise ValueError(f"normal must be unit length, got |n|={np.linalg.norm(n)}")
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: p -> R p + t."""

    rotation: Array
    translation: Array

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        object.__setattr__(self, "translation", _vec(self.translation, "translation"))
        if self.rotation.shape[0] != self.translation.shape[0]:
            raise ValueError("rotation and translation dimensions differ")

    @classmethod
    def identity(cls, dim: int) -> "Pose":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def planar(cls, angle: float, translation) -> "Pose":
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=np.float64))

    def apply(self, points: Array) -> Array:
        """Transform an (n, d) position array."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def rotate(self, vectors: Array) -> Array:
        """Rotate an (n, d) direction array (no translation)."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T


@dataclass(frozen=True)
class OrientedBox:
    """Box with arbitrary orientation, used as an occluder."""

    center: Array
    half_extents: Array
    rotation: Array

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, "center"))
        h = _vec(self.half_extents, "half_extents")
        if np.any(h <= 0):
            raise ValueError("half_extents must be positive")
        object.__setattr__(self, "half_extents", h)
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))

    @classmethod
    def axis_aligned(cls, center, half_extents) -> "OrientedBox":
        c = np.asarray(center, dtype=np.float64)
        return cls(c, np.asarray(half_extents, dtype=np.float64), np.eye(c.shape[0]))


@dataclass
class RegionMap:
    """Clustering of surface samples into labeled regions."""

    labels: Array              # (m,) region index per sample
    centers: Array             # (k, d) region centers
    mean_normals: Array        # (k, d) unit mean normals
    normal_weight: float
    cost_history: list = field(default_factory=list)

    @property
    def n_regions(self) -> int:
        return self.centers.shape[0]

    def to_records(self) -> list:
        """Flat dicts for JSON-lines export."""
        recs = []
        for k in range(self.n_regions):
            recs.append({
                "type": "region",
                "region": k,
                "center": [float(v) for v in self.centers[k]],
                "mean_normal": [float(v) for v in self.mean_normals[k]],
                "members": [int(m) for m in np.flatnonzero(self.labels == k)],
            })
        return recs


def positions_of(points) -> Array:
    """(n, d) position array from a SurfacePoint list (or pass arrays through)."""
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=np.float64)
    return np.array([p.position for p in points], dtype=np.float64)


def normals_of(points) -> Array:
    if isinstance(points, np.ndarray):
        return np.asarray(points, dtype=np.float64)
    return np.array([p.normal for p in points], dtype=np.float64)


# ---------------------------------------------------------------------------
# sampling


def sample_surface_points(shape_spec, m: int, seed: int, jitter: float = 1.0):
    """Sample m points on a primitive's surface, stratified by measure.

    shape_spec is the side-length sequence of an axis-aligned primitive
    centered at the origin: length 2 for a rectangle (points on the
    perimeter, arc-length measure) or length 3 for a box (points on the
    faces, area measure). The measure is split into m equal segments in
    a fixed traversal order and one point is drawn per segment; jitter
    scales the in-segment offset (jitter=0 puts every point at its
    segment midpoint).

    Returns a list of SurfacePoint with outward normals.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 <= jitter <= 1.0:
        raise ValueError("jitter must be in [0, 1]")
    spec = np.asarray(shape_spec, dtype=np.float64).ravel()
    if np.any(spec <= 0) or not np.all(np.isfinite(spec)):
        raise ValueError("shape_spec side lengths must be positive and finite")
    rng = np.random.default_rng(seed)
    if spec.shape[0] == 2:
        return _sample_rectangle_perimeter(spec[0], spec[1], m, rng, jitter)
    if spec.shape[0] == 3:
        return _sample_box_faces(spec, m, rng, jitter)
    raise ValueError(
        f"unsupported shape_spec with {spec.shape[0]} side lengths "
        "(supported: 2 = rectangle perimeter, 3 = box surface)")


def _sample_rectangle_perimeter(w, h, m, rng, jitter):
    # counterclockwise from the bottom-left corner: bottom, right, top, left
    per = 2.0 * (w + h)
    seg = per / m
    u = rng.random(m)
    s = (np.arange(m) + 0.5 + jitter * (u - 0.5)) * seg
    pts = []
    for si in s:
        if si < w:
            p = (-w / 2 + si, -h / 2)
            n = (0.0, -1.0)
        elif si < w + h:
            p = (w / 2, -h / 2 + (si - w))
            n = (1.0, 0.0)
        elif si < 2 * w + h:
            p = (w / 2 - (si - w - h), h / 2)
            n = (0.0, 1.0)
        else:
            p = (-w / 2, h / 2 - (si - 2 * w - h))
            n = (-1.0, 0.0)
        pts.append(SurfacePoint(np.array(p), np.array(n)))
    return pts


def _sample_box_faces(sides, m, rng, jitter):
    # fixed face order: -x, +x, -y, +y, -z, +z
    sx, sy, sz = sides
    faces = [
        (np.array([-sx / 2, 0, 0]), np.array([-1.0, 0, 0]), 1, 2, sy, sz),
        (np.array([sx / 2, 0, 0]), np.array([1.0, 0, 0]), 1, 2, sy, sz),
        (np.array([0, -sy / 2, 0]), np.array([0, -1.0, 0]), 0, 2, sx, sz),
        (np.array([0, sy / 2, 0]), np.array([0, 1.0, 0]), 0, 2, sx, sz),
        (np.array([0, 0, -sz / 2]), np.array([0, 0, -1.0]), 0, 1, sx, sy),
        (np.array([0, 0, sz / 2]), np.array([0, 0, 1.0]), 0, 1, sx, sy),
    ]
    areas = np.array([a * b for (_, _, _, _, a, b) in faces])
    quota = areas / areas.sum() * m
    counts = np.floor(quota).astype(int)
    rem = quota - counts
    for idx in np.argsort(-rem)[: m - counts.sum()]:
        counts[idx] += 1
    pts = []
    for (origin, normal, ax_u, ax_v, a, b), c in zip(faces, counts):
        if c == 0:
            continue
        # strips along the face's first local axis, full extent on the second
        for j in range(c):
            du = (j + 0.5 + jitter * (rng.random() - 0.5)) * (a / c) - a / 2
            dv = jitter * (rng.random() - 0.5) * b
            p = origin.copy()
            p[ax_u] += du
            p[ax_v] += dv
            pts.append(SurfacePoint(p, normal))
    return pts


def farthest_point_sample(points, k: int, seed: int) -> Array:
    """Greedy max-min selection of k indices; the first is a seeded draw."""
    pos = positions_of(points)
    n = pos.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    mind = np.linalg.norm(pos - pos[chosen[0]], axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(mind))
        chosen[i] = nxt
        mind = np.minimum(mind, np.linalg.norm(pos - pos[nxt], axis=1))
    return chosen


# ---------------------------------------------------------------------------
# region clustering


def region_distances(pos, nrm, centers, center_normals, normal_weight):
    """(m, k) assignment distances: (1-w)*|p - mu| + w*(1 - n . nbar)."""
    d_pos = np.linalg.norm(pos[:, None, :] - centers[None, :, :], axis=2)
    d_nrm = 1.0 - nrm @ center_normals.T
    return (1.0 - normal_weight) * d_pos + normal_weight * d_nrm


def _geometric_median(pts, start, steps=8):
    # Weiszfeld iterations that only accept improving candidates, so the
    # positional cost of a cluster never increases during an update.
    x = start.copy()
    best = np.linalg.norm(pts - x, axis=1).sum()
    for _ in range(steps):
        d = np.linalg.norm(pts - x, axis=1)
        w = 1.0 / np.maximum(d, 1e-12)
        cand = (pts * w[:, None]).sum(axis=0) / w.sum()
        cost = np.linalg.norm(pts - cand, axis=1).sum()
        if cost < best - 1e-15:
            x, best = cand, cost
        else:
            break
    return x


def cluster_regions(points, k: int, normal_weight: float = 0.5, seed: int = 0,
                    max_iters: int = 100) -> RegionMap:
    """Lloyd-style clustering under a mixed position/normal metric.

    Assignment distance d(m, k) = (1-w)*|p_m - mu_k| + w*(1 - n_m . nbar_k)
    with w = normal_weight. Centers start at a farthest-point sample.
    Mean normals are renormalized each iteration (the exact minimizer of
    the normal term); positions move by guarded Weiszfeld steps (the
    unsquared positional term is not minimized by the mean, and the
    guard preserves the nonincreasing-cost contract, asserted per
    iteration). Empty clusters are reseeded to the worst-assigned point.
    """
    if isinstance(points, np.ndarray):
        raise ValueError("cluster_regions needs SurfacePoint inputs (normals required)")
    pos = positions_of(points)
    nrm = normals_of(points)
    m = pos.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    if not 0.0 <= normal_weight <= 1.0:
        raise ValueError("normal_weight must be in [0, 1]")

    init = farthest_point_sample(pos, k, seed)
    centers = pos[init].copy()
    cnorm = nrm[init].copy()
    labels = None
    history: list = []

    it = 0
    while True:
        dist = region_distances(pos, nrm, centers, cnorm, normal_weight)
        new_labels = dist.argmin(axis=1)
        point_cost = dist[np.arange(m), new_labels].copy()
        reseeded = False
        for kk in range(k):
            if not np.any(new_labels == kk):
                worst = int(np.argmax(point_cost))
                centers[kk] = pos[worst]
                cnorm[kk] = nrm[worst]
                new_labels[worst] = kk
                point_cost[worst] = normal_weight * (1.0 - nrm[worst] @ nrm[worst])
                reseeded = True
        cost = float(point_cost.sum())
        if history and cost > history[-1] + 1e-9:
            raise RuntimeError(
                f"clustering cost increased ({history[-1]} -> {cost}); "
                "monotonicity contract broken")
        history.append(cost)
        stable = labels is not None and not reseeded and np.array_equal(new_labels, labels)
        labels = new_labels
        it += 1
        if stable or it >= max_iters:
            break
        for kk in range(k):
            members = labels == kk
            mean_n = nrm[members].mean(axis=0)
            nn = np.linalg.norm(mean_n)
            if nn > 1e-12:
                cnorm[kk] = mean_n / nn
            if normal_weight < 1.0:
                centers[kk] = _geometric_median(pos[members], centers[kk])
            else:
                # positional term has zero weight; the mean is as good as any
                centers[kk] = pos[members].mean(axis=0)

    return RegionMap(labels=labels, centers=centers, mean_normals=cnorm,
                     normal_weight=float(normal_weight), cost_history=history)


# ---------------------------------------------------------------------------
# transforms and weights


def transform_points(points, pose: Pose):
    """Apply a rigid pose: positions get R p + t, normals get R n."""
    pos = pose.apply(positions_of(points))
    nrm = pose.rotate(normals_of(points))
    return [SurfacePoint(p, n) for p, n in zip(pos, nrm)]


def directional_weight(p_keypoint, d_keypoint, p_surface, n_surface) -> float:
    """Facing weight in [0, 1] for a keypoint relative to a surface point.

    Product of two clamped cosines: the surface normal must face the
    keypoint (back-face suppression) and the keypoint's own direction
    must face the surface (opposing the normal). Coincident points give
    0 (the contact reward, not the energy term, owns touching states).
    """
    w = directional_weights(np.asarray(p_keypoint, dtype=np.float64),
                            np.asarray(d_keypoint, dtype=np.float64),
                            np.asarray(p_surface, dtype=np.float64)[None, :],
                            np.asarray(n_surface, dtype=np.float64)[None, :])
    return float(w[0])


def directional_weights(p_keypoint, d_keypoint, surf_positions, surf_normals) -> Array:
    """Vectorized directional_weight over (m, d) surface arrays."""
    v = p_keypoint[None, :] - surf_positions
    vn = np.linalg.norm(v, axis=1)
    dn = np.linalg.norm(d_keypoint)
    nn = np.linalg.norm(surf_normals, axis=1)
    safe = np.maximum(vn * nn, 1e-300)
    cos_obj = (v * surf_normals).sum(axis=1) / safe
    cos_key = (d_keypoint[None, :] * surf_normals).sum(axis=1) / np.maximum(dn * nn, 1e-300)
    w_obj = np.clip(cos_obj, 0.0, 1.0)
    w_key = np.clip(-cos_key, 0.0, 1.0)
    out = w_obj * w_key
    out[vn < 1e-12] = 0.0
    return out


def ray_box_occluded(origin, target, box: OrientedBox, eps: float = 1e-9) -> bool:
    """True iff the open segment origin->target passes through the box.

    Slab method in the box frame. Only interior crossings count: the
    parameter interval is (eps, 1-eps), so endpoints exactly on the box
    surface do not occlude.
    """
    o = np.asarray(origin, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    u0 = box.rotation.T @ (o - box.center)
    u1 = box.rotation.T @ (t - box.center)
    mask = kernels.segment_box_mask(
        np.ascontiguousarray(u0[None, :]),
        np.ascontiguousarray(u1[None, None, :]),
        np.zeros(u0.shape[0]), np.ascontiguousarray(box.half_extents), eps)
    return bool(mask[0, 0])
