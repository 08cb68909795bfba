import os
import subprocess
import sys

import numpy as np
import pytest

from contactcover import kernels as K

pytestmark = pytest.mark.skipif(
    not K.HAS_NUMBA and os.environ.get("CONTACTCOVER_NUMBA", "auto") != "0",
    reason="numba unavailable; cross-backend tests need both paths")


STEP_ARGS = dict(cap=0.02, radius=0.02, xmin=0.02, xmax=0.98, ymin=0.02, ymax=0.93,
                 box_half=0.05, box_cy=0.90, box_hy=0.05, bxmin=0.05, bxmax=0.95,
                 stiffness=10.0)


def _rand_step_inputs(rng, n):
    ball = np.column_stack([rng.uniform(0.02, 0.98, n), rng.uniform(0.02, 0.93, n)])
    box_x = rng.uniform(0.05, 0.95, n)
    actions = rng.normal(scale=0.05, size=(n, 2))
    return ball, box_x, actions


def test_gae_backends_bitwise_equal():
    if not K.USE_NUMBA:
        pytest.skip("numba backend disabled")
    rng = np.random.default_rng(0)
    for _ in range(20):
        T, N = int(rng.integers(1, 40)), int(rng.integers(1, 8))
        r = rng.standard_normal((T, N))
        v = rng.standard_normal((T + 1, N))
        d = (rng.random((T, N)) < 0.15).astype(np.float64)
        a1, ret1 = K.gae_backward_numpy(r, v, d, 0.99, 0.95)
        a2, ret2 = K.gae_backward_numba(r, v, d, 0.99, 0.95)
        assert np.array_equal(a1, a2)
        assert np.array_equal(ret1, ret2)


def test_pushbox_step_backends_bitwise_equal():
    if not K.USE_NUMBA:
        pytest.skip("numba backend disabled")
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(1, 64))
        ball, box_x, actions = _rand_step_inputs(rng, n)
        args = tuple(STEP_ARGS.values())

        b1, x1 = ball.copy(), box_x.copy()
        ap1, f1 = np.zeros((n, 2)), np.zeros(n)
        K.pushbox_step_numpy(b1, x1, actions, ap1, f1, *args)

        b2, x2 = ball.copy(), box_x.copy()
        ap2, f2 = np.zeros((n, 2)), np.zeros(n)
        K.pushbox_step_numba(b2, x2, actions, ap2, f2, *args)

        for a, b in [(b1, b2), (x1, x2), (ap1, ap2), (f1, f2)]:
            assert np.array_equal(a, b)


def test_segment_box_backends_equal():
    if not K.USE_NUMBA:
        pytest.skip("numba backend disabled")
    rng = np.random.default_rng(2)
    for _ in range(30):
        n, m = int(rng.integers(1, 16)), int(rng.integers(1, 20))
        org = rng.uniform(-1, 1, size=(n, 2))
        tgt = rng.uniform(-1, 1, size=(n, m, 2))
        # exercise the parallel-axis branch too
        if rng.random() < 0.5:
            tgt[:, 0, 1] = org[:, 1]
        center = rng.uniform(-0.5, 0.5, size=2)
        half = rng.uniform(0.05, 0.5, size=2)
        m1 = K.segment_box_mask_numpy(org, tgt, center, half, 1e-9)
        m2 = K.segment_box_mask_numba(org, tgt, center, half, 1e-9)
        assert np.array_equal(m1, m2)


def test_energy_sum_backends_close():
    if not K.USE_NUMBA:
        pytest.skip("numba backend disabled")
    rng = np.random.default_rng(3)
    for _ in range(30):
        n, m = int(rng.integers(1, 16)), int(rng.integers(1, 32))
        kp = rng.uniform(0, 1, size=(n, 2))
        pts = rng.uniform(0, 1, size=(n, m, 2))
        w = rng.uniform(0, 1, size=(n, m))
        e1 = K.energy_sum_numpy(kp, pts, w, 0.15)
        e2 = K.energy_sum_numba(kp, pts, w, 0.15)
        assert np.allclose(e1, e2, rtol=1e-12, atol=0)


def test_pushbox_kernel_respects_bounds():
    rng = np.random.default_rng(4)
    for _ in range(200):
        ball, box_x, actions = _rand_step_inputs(rng, 8)
        K.pushbox_step(ball, box_x, actions * 0.2, np.zeros((8, 2)), np.zeros(8),
                       *STEP_ARGS.values())
        assert np.all(ball[:, 0] >= STEP_ARGS["xmin"] - 1e-12)
        assert np.all(ball[:, 0] <= STEP_ARGS["xmax"] + 1e-12)
        assert np.all(ball[:, 1] >= STEP_ARGS["ymin"] - 1e-12)
        assert np.all(ball[:, 1] <= STEP_ARGS["ymax"] + 1e-12)
        assert np.all(box_x >= STEP_ARGS["bxmin"] - 1e-12)
        assert np.all(box_x <= STEP_ARGS["bxmax"] + 1e-12)


def test_action_cap_applied():
    ball = np.array([[0.5, 0.2]])
    box_x = np.array([0.5])
    applied = np.zeros((1, 2))
    force = np.zeros(1)
    K.pushbox_step(ball, box_x, np.array([[3.0, 4.0]]), applied, force,
                   *STEP_ARGS.values())
    assert np.hypot(*applied[0]) == pytest.approx(0.02, abs=1e-15)
    assert np.allclose(ball[0], [0.5 + 0.012, 0.2 + 0.016])


def _backend_of(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("CONTACTCOVER_NUMBA", None)
    else:
        env["CONTACTCOVER_NUMBA"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", "from contactcover import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    return out.stdout.strip()


def test_backend_env_flag():
    assert _backend_of("0") == "numpy"
    if K.HAS_NUMBA:
        assert _backend_of("1") == "numba"
        assert _backend_of(None) == "numba"
