"""Time the numba kernels against the pure-numpy fallbacks.

Shapes match one training update of the push-box testbed (32 envs,
16-step rollouts, 16 box surface points), plus a full-horizon advantage
scan. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--reps 2000]

Requires numba importable; the numpy column is always measured.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from contactcover import kernels


def time_call(fn, args, reps):
    fn(*args)  # warm start (JIT / cache fill)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn(*args)
    return (time.perf_counter() - t0) / reps


def bench_gae(rng, T, N):
    rewards = rng.normal(size=(T, N))
    values = rng.normal(size=(T + 1, N))
    dones = (rng.random(size=(T, N)) < 0.05).astype(np.float64)
    return (rewards, values, dones, 0.99, 0.95)


def bench_pushbox(rng, n):
    ball = np.column_stack([rng.uniform(0.05, 0.95, n),
                            rng.uniform(0.05, 0.90, n)])
    box_x = rng.uniform(0.1, 0.9, n)
    actions = rng.normal(scale=0.02, size=(n, 2))
    out_applied = np.zeros((n, 2))
    out_force = np.zeros(n)
    return (ball, box_x, actions, out_applied, out_force,
            0.02, 0.02, 0.02, 0.98, 0.02, 0.93,
            0.05, 0.90, 0.05, 0.05, 0.95, 10.0)


def bench_mask(rng, n, m):
    origins = rng.uniform(-0.5, 0.5, size=(n, 2))
    targets = rng.uniform(-0.5, 0.5, size=(n, m, 2))
    return (origins, targets, np.zeros(2), np.array([0.05, 0.05]), 1e-9)


def bench_energy(rng, n, m):
    keypoints = rng.uniform(0.0, 1.0, size=(n, 2))
    points = rng.uniform(0.0, 1.0, size=(n, m, 2))
    weights = rng.random(size=(n, m))
    return (keypoints, points, weights, 0.25)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=2000)
    args = ap.parse_args()

    if not kernels.HAS_NUMBA:
        raise SystemExit("numba backend unavailable "
                         "(is CONTACTCOVER_NUMBA=0 set?)")
    kernels.warmup()
    rng = np.random.default_rng(0)

    cases = [
        ("gae_backward (16x32)", kernels.gae_backward_numpy,
         kernels.gae_backward_numba, bench_gae(rng, 16, 32)),
        ("gae_backward (150x32)", kernels.gae_backward_numpy,
         kernels.gae_backward_numba, bench_gae(rng, 150, 32)),
        ("pushbox_step (32 envs)", kernels.pushbox_step_numpy,
         kernels.pushbox_step_numba, bench_pushbox(rng, 32)),
        ("segment_box_mask (32x16)", kernels.segment_box_mask_numpy,
         kernels.segment_box_mask_numba, bench_mask(rng, 32, 16)),
        ("energy_sum (32x16)", kernels.energy_sum_numpy,
         kernels.energy_sum_numba, bench_energy(rng, 32, 16)),
    ]

    print(f"{'kernel':<26} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for name, f_np, f_nb, call_args in cases:
        # confirm the two backends agree before timing them; pushbox
        # mutates its array arguments in place, so compare those too
        args_np = [np.copy(a) if isinstance(a, np.ndarray) else a
                   for a in call_args]
        args_nb = [np.copy(a) if isinstance(a, np.ndarray) else a
                   for a in call_args]
        r_np = f_np(*args_np)
        r_nb = f_nb(*args_nb)
        if r_np is None:
            pairs = [(a, b) for a, b in zip(args_np, args_nb)
                     if isinstance(a, np.ndarray)]
        elif isinstance(r_np, tuple):
            pairs = list(zip(r_np, r_nb))
        else:
            pairs = [(r_np, r_nb)]
        for a, b in pairs:
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
        t_np = time_call(f_np, call_args, args.reps)
        t_nb = time_call(f_nb, call_args, args.reps)
        print(f"{name:<26} {t_np * 1e6:>10.2f} {t_nb * 1e6:>10.2f} "
              f"{t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
