"""Hot numeric kernels, each with a numba and a pure-numpy twin.

The backend is picked once at import time from the env var
``CONTACTCOVER_NUMBA``:

    auto (default)  use numba if importable, else numpy
    1 / on / numba  require numba (ImportError if missing)
    0 / off / numpy force the pure-numpy fallback

Dispatching names (``gae_backward``, ``pushbox_step``, ...) point at the
selected backend. The ``*_numpy`` / ``*_numba`` variants stay importable
so benchmarks and cross-backend tests can call both explicitly. Within a
backend results are bitwise deterministic; across backends they agree
bitwise except for sums over surface points, which agree to 1e-12
relative tolerance (different accumulation order).
"""
from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("CONTACTCOVER_NUMBA", "auto").strip().lower()
if _flag in ("0", "off", "numpy", "false"):
    _want = False
elif _flag in ("1", "on", "numba", "true"):
    _want = True
else:
    _want = None  # auto

HAS_NUMBA = False
if _want is not False:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        if _want is True:
            raise

USE_NUMBA = HAS_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"

_jit = {"cache": True, "nogil": True}


# ---------------------------------------------------------------------------
# generalized advantage estimation backward scan


def gae_backward_numpy(rewards, values, dones, gamma, lam):
    """adv, ret for a (T, N) rollout; values has the bootstrap row (T+1, N).

    dones is float 0/1; a done step masks the bootstrap and cuts the
    recursion, so truncation at the horizon is treated as termination.
    """
    T, N = rewards.shape
    adv = np.empty((T, N), dtype=np.float64)
    last = np.zeros(N, dtype=np.float64)
    for t in range(T - 1, -1, -1):
        notdone = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * notdone - values[t]
        last = delta + gamma * lam * notdone * last
        adv[t] = last
    ret = adv + values[:T]
    return adv, ret


def _gae_backward_loop(rewards, values, dones, gamma, lam):
    T, N = rewards.shape
    adv = np.empty((T, N), dtype=np.float64)
    for n in range(N):
        last = 0.0
        for t in range(T - 1, -1, -1):
            notdone = 1.0 - dones[t, n]
            delta = rewards[t, n] + gamma * values[t + 1, n] * notdone - values[t, n]
            last = delta + gamma * lam * notdone * last
            adv[t, n] = last
    ret = adv + values[:T]
    return adv, ret


# ---------------------------------------------------------------------------
# push-box physics step
#
# Moves each ball by its (norm-capped) action, clamps to the workspace,
# then resolves ball/box overlap by the minimal-penetration face among
# left/right/bottom. The top face is flush with the wall and per-step
# motion is capped well below its minimum possible depth, so it is never
# the minimal face (see pushbox module). Side-face resolution translates
# the box by the penetration (clamped to its rail) and re-flushes the
# ball against it; bottom-face resolution just pushes the ball out.
# Returns force through out_force as stiffness * penetration.


def pushbox_step_numpy(ball, box_x, actions, out_applied, out_force,
                       cap, radius, xmin, xmax, ymin, ymax,
                       box_half, box_cy, box_hy, bxmin, bxmax, stiffness):
    ax = actions[:, 0]
    ay = actions[:, 1]
    n = np.sqrt(ax * ax + ay * ay)
    s = cap / np.maximum(n, 1e-300)
    big = n > cap
    ax = np.where(big, ax * s, ax)
    ay = np.where(big, ay * s, ay)
    out_applied[:, 0] = ax
    out_applied[:, 1] = ay

    x = np.minimum(np.maximum(ball[:, 0] + ax, xmin), xmax)
    y = np.minimum(np.maximum(ball[:, 1] + ay, ymin), ymax)

    ex0 = box_x - box_half - radius
    ex1 = box_x + box_half + radius
    ey0 = box_cy - box_hy - radius
    ey1 = box_cy + box_hy + radius

    overlap = (x > ex0) & (x < ex1) & (y > ey0) & (y < ey1)
    pl = x - ex0
    pr = ex1 - x
    pb = y - ey0

    left = overlap & (pl <= pr) & (pl <= pb)
    right = overlap & ~left & (pr <= pb)
    bottom = overlap & ~left & ~right

    nb_l = np.minimum(np.maximum(box_x + pl, bxmin), bxmax)
    nb_r = np.minimum(np.maximum(box_x - pr, bxmin), bxmax)
    box_new = np.where(left, nb_l, np.where(right, nb_r, box_x))
    # re-flushed positions get the workspace clamp too: with the ball
    # pinned against a wall the float round-trip can land 1 ulp outside
    x = np.where(left, box_new - box_half - radius,
                 np.where(right, box_new + box_half + radius, x))
    x = np.minimum(np.maximum(x, xmin), xmax)
    y = np.where(bottom, ey0, y)
    out_force[:] = np.where(left, stiffness * pl,
                            np.where(right, stiffness * pr,
                                     np.where(bottom, stiffness * pb, 0.0)))

    ball[:, 0] = x
    ball[:, 1] = y
    box_x[:] = box_new


def _pushbox_step_loop(ball, box_x, actions, out_applied, out_force,
                       cap, radius, xmin, xmax, ymin, ymax,
                       box_half, box_cy, box_hy, bxmin, bxmax, stiffness):
    N = ball.shape[0]
    for i in range(N):
        ax = actions[i, 0]
        ay = actions[i, 1]
        n = np.sqrt(ax * ax + ay * ay)
        if n > cap:
            s = cap / n
            ax = ax * s
            ay = ay * s
        out_applied[i, 0] = ax
        out_applied[i, 1] = ay

        x = min(max(ball[i, 0] + ax, xmin), xmax)
        y = min(max(ball[i, 1] + ay, ymin), ymax)

        bx = box_x[i]
        ex0 = bx - box_half - radius
        ex1 = bx + box_half + radius
        ey0 = box_cy - box_hy - radius
        ey1 = box_cy + box_hy + radius

        force = 0.0
        if ex0 < x < ex1 and ey0 < y < ey1:
            pl = x - ex0
            pr = ex1 - x
            pb = y - ey0
            if pl <= pr and pl <= pb:
                bx = min(max(bx + pl, bxmin), bxmax)
                x = min(max(bx - box_half - radius, xmin), xmax)
                force = stiffness * pl
            elif pr <= pb:
                bx = min(max(bx - pr, bxmin), bxmax)
                x = min(max(bx + box_half + radius, xmin), xmax)
                force = stiffness * pr
            else:
                y = ey0
                force = stiffness * pb

        ball[i, 0] = x
        ball[i, 1] = y
        box_x[i] = bx
        out_force[i] = force


# ---------------------------------------------------------------------------
# segment/AABB occlusion test, batched over (env, surface point)
#
# Occluded iff the open segment interior (t in (eps, 1-eps)) intersects
# the box: slab test per axis, endpoints on the box count as clear.


def segment_box_mask_numpy(origins, targets, center, half, eps):
    o = origins[:, None, :] - center          # (N, M, d)
    d = (targets - center) - o                # (N, M, d)
    zero = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - o) / d
        t2 = (half - o) / d
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    inside = np.abs(o) <= half
    lo = np.where(zero, np.where(inside, -np.inf, np.inf), lo)
    hi = np.where(zero, np.where(inside, np.inf, -np.inf), hi)
    enter = lo.max(axis=-1)
    exit_ = hi.min(axis=-1)
    return (enter <= exit_) & (exit_ > eps) & (enter < 1.0 - eps)


def _segment_box_mask_loop(origins, targets, center, half, eps):
    N, M, dim = targets.shape
    out = np.empty((N, M), dtype=np.bool_)
    for i in range(N):
        for m in range(M):
            enter = -np.inf
            exit_ = np.inf
            for a in range(dim):
                o = origins[i, a] - center[a]
                d = (targets[i, m, a] - center[a]) - o
                if d == 0.0:
                    if abs(o) > half[a]:
                        enter = np.inf
                        exit_ = -np.inf
                        break
                else:
                    t1 = (-half[a] - o) / d
                    t2 = (half[a] - o) / d
                    if t1 > t2:
                        t1, t2 = t2, t1
                    if t1 > enter:
                        enter = t1
                    if t2 < exit_:
                        exit_ = t2
            out[i, m] = (enter <= exit_) and (exit_ > eps) and (enter < 1.0 - eps)
    return out


# ---------------------------------------------------------------------------
# energy accumulation: sum_m w[i, m] * exp(-|kp_i - pts_i,m| / decay)


def energy_sum_numpy(keypoints, points, weights, decay):
    diff = points - keypoints[:, None, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    return (weights * np.exp(-dist / decay)).sum(axis=-1)


def _energy_sum_loop(keypoints, points, weights, decay):
    N, M, dim = points.shape
    out = np.zeros(N, dtype=np.float64)
    for i in range(N):
        acc = 0.0
        for m in range(M):
            sq = 0.0
            for a in range(dim):
                dd = keypoints[i, a] - points[i, m, a]
                sq += dd * dd
            acc += weights[i, m] * np.exp(-np.sqrt(sq) / decay)
        out[i] = acc
    return out


# ---------------------------------------------------------------------------
# backend selection

if USE_NUMBA:
    gae_backward_numba = njit(**_jit)(_gae_backward_loop)
    pushbox_step_numba = njit(**_jit)(_pushbox_step_loop)
    segment_box_mask_numba = njit(**_jit)(_segment_box_mask_loop)
    energy_sum_numba = njit(**_jit)(_energy_sum_loop)

    gae_backward = gae_backward_numba
    pushbox_step = pushbox_step_numba
    segment_box_mask = segment_box_mask_numba
    energy_sum = energy_sum_numba
else:
    gae_backward_numba = None
    pushbox_step_numba = None
    segment_box_mask_numba = None
    energy_sum_numba = None

    gae_backward = gae_backward_numpy
    pushbox_step = pushbox_step_numpy
    segment_box_mask = segment_box_mask_numpy
    energy_sum = energy_sum_numpy


def warmup():
    """Trigger JIT compilation on tiny inputs (no-op on the numpy backend)."""
    if not USE_NUMBA:
        return
    r = np.zeros((2, 1))
    v = np.zeros((3, 1))
    d = np.zeros((2, 1))
    gae_backward(r, v, d, 0.99, 0.95)
    ball = np.array([[0.5, 0.5]])
    bx = np.array([0.5])
    act = np.zeros((1, 2))
    app = np.zeros((1, 2))
    frc = np.zeros(1)
    pushbox_step(ball, bx, act, app, frc,
                 0.02, 0.02, 0.02, 0.98, 0.02, 0.93,
                 0.05, 0.90, 0.05, 0.05, 0.95, 10.0)
    org = np.zeros((1, 2))
    tgt = np.ones((1, 1, 2))
    segment_box_mask(org, tgt, np.array([0.5, 0.5]), np.array([0.1, 0.1]), 1e-9)
    energy_sum(org, tgt, np.ones((1, 1)), 0.1)
