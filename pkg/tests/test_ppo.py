import numpy as np
import pytest

from contactcover import nn, ppo
from toytask import point_reach_returns


def tiny_policy(seed=0, obs_dim=3, act_dim=2, hidden=(8, 8)):
    return ppo.build_policy(obs_dim, act_dim, hidden=hidden,
                            actor_seed=seed, critic_seed=seed + 1)


def unrolled_gae_3(r, v, d, gamma, lam):
    """Explicit 3-step summation (no recursion)."""
    n = 1.0 - d
    delta = r + gamma * v[1:] * n - v[:3]
    g = gamma * lam
    adv = np.empty_like(r)
    adv[2] = delta[2]
    adv[1] = delta[1] + g * n[1] * delta[2]
    adv[0] = delta[0] + g * n[0] * delta[1] + g * g * n[0] * n[1] * delta[2]
    return adv, adv + v[:3]


# ---------------------------------------------------------------------------
# GAE


def test_gae_lambda_zero_collapses_to_td_error():
    rng = np.random.default_rng(0)
    r = rng.normal(size=(6, 4))
    v = rng.normal(size=(7, 4))
    d = (rng.random((6, 4)) < 0.3).astype(np.float64)
    adv, ret = ppo.compute_gae(r, v, d, gamma=0.9, lam=0.0)
    want = r + 0.9 * v[1:] * (1 - d) - v[:6]
    assert adv == pytest.approx(want, abs=1e-12)
    assert ret == pytest.approx(want + v[:6], abs=1e-12)


def test_gae_gamma_zero():
    rng = np.random.default_rng(1)
    r = rng.normal(size=(5, 3))
    v = rng.normal(size=(6, 3))
    d = (rng.random((5, 3)) < 0.3).astype(np.float64)
    adv, _ = ppo.compute_gae(r, v, d, gamma=0.0, lam=0.95)
    assert adv == pytest.approx(r - v[:5], abs=1e-12)


def test_gae_matches_unrolled_sum_oracle():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        n_envs = int(rng.integers(1, 5))
        r = rng.normal(size=(3, n_envs))
        v = rng.normal(size=(4, n_envs))
        d = (rng.random((3, n_envs)) < 0.4).astype(np.float64)
        gamma = float(rng.uniform(0.5, 1.0))
        lam = float(rng.uniform(0.0, 1.0))
        adv, ret = ppo.compute_gae(r, v, d, gamma, lam)
        adv_o, ret_o = unrolled_gae_3(r, v, d, gamma, lam)
        worst = max(worst, float(np.abs(adv - adv_o).max()),
                    float(np.abs(ret - ret_o).max()))
    assert worst < 1e-10


def test_gae_shape_validation():
    with pytest.raises(ValueError):
        ppo.compute_gae(np.zeros((4, 2)), np.zeros((4, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        ppo.compute_gae(np.zeros((4, 2)), np.zeros((5, 2)), np.zeros((3, 2)))


# ---------------------------------------------------------------------------
# acting


def test_sample_action_tiny_std_tracks_mean():
    policy = tiny_policy(seed=3)
    policy.log_std[:] = ppo.LOG_STD_MIN
    rng = np.random.default_rng(4)
    obs = rng.normal(size=(64, 3))
    action, _, _ = ppo.sample_action(policy, obs, rng)
    mu = ppo.mean_action(policy, obs)
    assert np.abs(action - mu).max() < 5 * np.exp(ppo.LOG_STD_MIN)


def test_log_prob_peak_at_mean():
    log_std = np.array([-0.3, 0.7])
    peak = ppo.gaussian_log_prob(np.zeros((1, 2)), log_std)[0]
    sigma = np.exp(log_std)
    want = -np.log(2 * np.pi * sigma[0] * sigma[1])
    assert peak == pytest.approx(want, abs=1e-12)
    # any displacement has lower density
    assert ppo.gaussian_log_prob(np.array([[0.1, 0.0]]), log_std)[0] < peak


def test_sample_action_logp_consistent_and_seeded():
    policy = tiny_policy(seed=5)
    policy.log_std[:] = [0.2, -1.0]
    obs = np.random.default_rng(6).normal(size=(32, 3))
    a1, lp1, v1 = ppo.sample_action(policy, obs, np.random.default_rng(7))
    a2, lp2, v2 = ppo.sample_action(policy, obs, np.random.default_rng(7))
    assert np.array_equal(a1, a2) and np.array_equal(lp1, lp2)
    mu = ppo.mean_action(policy, obs)
    z = (a1 - mu) / np.exp(policy.log_std)
    assert lp1 == pytest.approx(ppo.gaussian_log_prob(z, policy.log_std),
                                abs=1e-12)
    assert v1 == pytest.approx(ppo.value_of(policy, obs), abs=1e-15)


def test_build_policy_validation():
    with pytest.raises(ValueError):
        ppo.build_policy(3, 2, init_log_std=5.0)


# ---------------------------------------------------------------------------
# update gradients


def test_normalize_advantages_moments():
    adv = np.random.default_rng(8).normal(2.0, 3.0, size=512)
    out = ppo.normalize_advantages(adv)
    assert abs(out.mean()) < 1e-8
    assert abs(out.std() - 1.0) < 1e-6


def test_normalize_advantages_floor_caps_noise_batches():
    # nearly-flat advantages must not get amplified to unit scale
    adv = np.random.default_rng(9).normal(0.0, 1e-3, size=512)
    out = ppo.normalize_advantages(adv, std_floor=0.05)
    assert out.std() < 0.05
    big = ppo.normalize_advantages(adv * 1e4, std_floor=0.05)
    assert abs(big.std() - 1.0) < 1e-6


def _fresh_batch(policy, rng, batch=64):
    obs = rng.normal(size=(batch, policy.obs_dim))
    actions, logp, _ = ppo.sample_action(policy, obs, rng)
    return obs, actions, logp


def test_zero_advantages_freeze_actor():
    policy = tiny_policy(seed=9)
    rng = np.random.default_rng(10)
    obs, actions, logp = _fresh_batch(policy, rng)
    actor_before = [p.copy() for p in policy.actor.params]
    critic_before = [p.copy() for p in policy.critic.params]
    log_std_before = policy.log_std.copy()
    opt = nn.AdamState.for_params(policy.params)
    ppo.ppo_update(policy, opt, obs, actions, logp,
                   np.zeros(len(obs)), rng.normal(size=len(obs)),
                   np.random.default_rng(11))
    for before, after in zip(actor_before, policy.actor.params):
        assert np.array_equal(before, after)
    assert any(not np.array_equal(b, a)
               for b, a in zip(critic_before, policy.critic.params))
    assert not np.array_equal(log_std_before, policy.log_std)  # entropy term


def test_clipped_ratio_gates_gradient():
    eps = 0.2
    policy = tiny_policy(seed=12)
    rng = np.random.default_rng(13)
    obs, actions, logp = _fresh_batch(policy, rng, batch=16)
    adv = np.ones(16)
    ret = np.zeros(16)
    # ratio = exp(logp - old) = 1 + 2*eps > 1 + eps with positive advantage
    old = logp - np.log(1.0 + 2 * eps)
    grads, stats = ppo.clipped_gradients(policy, obs, actions, old, adv, ret,
                                         clip_eps=eps, vf_coef=0.0,
                                         ent_coef=0.0)
    n_actor = len(policy.actor.params)
    for g in grads[:n_actor] + [grads[-1]]:
        assert np.all(g == 0.0)
    assert stats["clip_fraction"] == 1.0
    # just inside the clip band the gradient flows
    old = logp - np.log(1.0 + 0.5 * eps)
    grads, stats = ppo.clipped_gradients(policy, obs, actions, old, adv, ret,
                                         clip_eps=eps, vf_coef=0.0,
                                         ent_coef=0.0)
    assert any(np.abs(g).max() > 0 for g in grads[:n_actor])
    assert stats["clip_fraction"] == 0.0


def test_negative_advantage_gate_mirrors():
    eps = 0.2
    policy = tiny_policy(seed=14)
    rng = np.random.default_rng(15)
    obs, actions, logp = _fresh_batch(policy, rng, batch=16)
    adv = -np.ones(16)
    old = logp + np.log(1.0 / (1.0 - 2 * eps))  # ratio = 1 - 2*eps
    grads, _ = ppo.clipped_gradients(policy, obs, actions, old, adv,
                                     np.zeros(16), clip_eps=eps,
                                     vf_coef=0.0, ent_coef=0.0)
    for g in grads[:len(policy.actor.params)] + [grads[-1]]:
        assert np.all(g == 0.0)


def test_gradients_match_vanilla_policy_gradient():
    """With ratio 1 (fresh batch) the clipped gradient must equal the
    plain policy gradient -mean(A * grad logp), checked against central
    finite differences of that loss."""
    policy = tiny_policy(seed=16)
    rng = np.random.default_rng(17)
    obs, actions, logp = _fresh_batch(policy, rng, batch=32)
    adv = rng.normal(size=32)

    grads, _ = ppo.clipped_gradients(policy, obs, actions, logp, adv,
                                     np.zeros(32), clip_eps=1e9,
                                     vf_coef=0.0, ent_coef=0.0)
    n_actor = len(policy.actor.params)
    analytic = grads[:n_actor] + [grads[-1]]

    def vanilla_loss():
        mu, _ = nn.forward(policy.actor, obs)
        z = (actions - mu) / np.exp(policy.log_std)
        return -float((adv * ppo.gaussian_log_prob(z, policy.log_std)).mean())

    eps = 1e-6
    flat_fd, flat_an = [], []
    for p, g in zip(policy.actor.params + [policy.log_std], analytic):
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = p[ix]
            p[ix] = orig + eps
            hi = vanilla_loss()
            p[ix] = orig - eps
            lo = vanilla_loss()
            p[ix] = orig
            flat_fd.append((hi - lo) / (2 * eps))
            flat_an.append(float(g[ix]))
    fd = np.array(flat_fd)
    an = np.array(flat_an)
    cos = float(fd @ an / (np.linalg.norm(fd) * np.linalg.norm(an)))
    assert cos > 0.999
    assert np.abs(fd - an).max() < 1e-4 * max(1.0, float(np.abs(fd).max()))


def test_update_deterministic_and_stats():
    def run():
        policy = tiny_policy(seed=18)
        rng = np.random.default_rng(19)
        obs, actions, logp = _fresh_batch(policy, rng, batch=256)
        adv = rng.normal(size=256)
        ret = rng.normal(size=256)
        opt = nn.AdamState.for_params(policy.params)
        stats = ppo.ppo_update(policy, opt, obs, actions, logp, adv, ret,
                               np.random.default_rng(20))
        return policy, stats
    p1, s1 = run()
    p2, s2 = run()
    for a, b in zip(p1.params, p2.params):
        assert np.array_equal(a, b)
    assert s1 == s2
    for key in ("pg_loss", "value_loss", "approx_kl", "clip_fraction",
                "log_std_mean"):
        assert np.isfinite(s1[key])


def test_log_std_stays_clamped():
    policy = tiny_policy(seed=21)
    policy.log_std[:] = ppo.LOG_STD_MAX
    rng = np.random.default_rng(22)
    obs, actions, logp = _fresh_batch(policy, rng, batch=128)
    opt = nn.AdamState.for_params(policy.params)
    for _ in range(5):
        ppo.ppo_update(policy, opt, obs, actions, logp,
                       rng.normal(size=128), rng.normal(size=128),
                       rng, ent_coef=10.0)  # strong push toward larger std
    assert (policy.log_std <= ppo.LOG_STD_MAX).all()
    assert (policy.log_std >= ppo.LOG_STD_MIN).all()


def test_weight_decay_shrinks_idle_actor():
    # zero advantages zero out policy-gradient terms, so only the decay
    # touches the actor weights
    policy = tiny_policy(seed=41)
    rng = np.random.default_rng(42)
    obs, actions, logp = _fresh_batch(policy, rng)
    before = [np.abs(w).sum() for w in policy.actor.weights]
    opt = nn.AdamState.for_params(policy.params)
    ppo.ppo_update(policy, opt, obs, actions, logp,
                   np.zeros(len(obs)), rng.normal(size=len(obs)),
                   np.random.default_rng(43), weight_decay=0.1)
    after = [np.abs(w).sum() for w in policy.actor.weights]
    assert all(a < b for a, b in zip(after, before))


def test_kl_early_stop_cuts_epochs():
    policy = tiny_policy(seed=31)
    rng = np.random.default_rng(32)
    obs, actions, logp = _fresh_batch(policy, rng, batch=256)
    adv = rng.normal(size=256) * 5.0
    ret = rng.normal(size=256)

    def run(target_kl):
        p = tiny_policy(seed=31)
        opt = nn.AdamState.for_params(p.params)
        return ppo.ppo_update(p, opt, obs, actions, logp, adv, ret,
                              np.random.default_rng(33), epochs=8,
                              lr=5e-2, target_kl=target_kl)

    guarded = run(target_kl=1e-6)
    free = run(target_kl=np.inf)
    assert guarded["epochs_run"] == 1
    assert free["epochs_run"] == 8


def test_non_finite_loss_raises():
    policy = tiny_policy(seed=23)
    rng = np.random.default_rng(24)
    obs, actions, logp = _fresh_batch(policy, rng, batch=8)
    with pytest.raises(RuntimeError, match="non-finite"):
        ppo.clipped_gradients(policy, obs, actions, logp,
                              np.full(8, np.inf), np.zeros(8))
    with pytest.raises(ValueError):
        ppo.ppo_update(policy, nn.AdamState.for_params(policy.params),
                       np.zeros((0, 3)), np.zeros((0, 2)), np.zeros(0),
                       np.zeros(0), np.zeros(0), rng)


# ---------------------------------------------------------------------------
# observation normalization


def test_running_norm_matches_batch_statistics():
    rng = np.random.default_rng(25)
    a = rng.normal(3.0, 2.0, size=(400, 5))
    b = rng.normal(-1.0, 0.5, size=(300, 5))
    norm = ppo.RunningNorm.create(5)
    norm.update(a)
    norm.update(b)
    both = np.concatenate([a, b])
    # the tiny initial pseudo-count (1e-4 at mean 0) leaves an O(1e-7) bias
    assert norm.mean == pytest.approx(both.mean(axis=0), abs=1e-5)
    assert norm.var == pytest.approx(both.var(axis=0), abs=1e-5)
    out = norm.normalize(both)
    assert abs(out.mean()) < 1e-6
    assert out.std(axis=0) == pytest.approx(np.ones(5), abs=1e-3)


def test_running_norm_clips_outliers():
    norm = ppo.RunningNorm.create(1)
    norm.update(np.zeros((100, 1)) + np.linspace(-1, 1, 100)[:, None])
    out = norm.normalize(np.array([[1e9], [-1e9]]))
    assert out[0, 0] == 10.0 and out[1, 0] == -10.0


def test_running_norm_npz_round_trip():
    norm = ppo.RunningNorm.create(3)
    norm.update(np.random.default_rng(26).normal(size=(50, 3)))
    data = {k: np.array(v) for k, v in norm.to_npz_dict().items()}
    back = ppo.RunningNorm.from_npz_dict(data)
    assert np.array_equal(back.mean, norm.mean)
    assert np.array_equal(back.var, norm.var)
    assert back.count == norm.count


def test_policy_npz_round_trip():
    policy = tiny_policy(seed=27)
    policy.log_std[:] = [-1.2, 0.3]
    back = ppo.policy_from_npz_dict(
        {k: np.array(v) for k, v in ppo.policy_to_npz_dict(policy).items()})
    for a, b in zip(policy.params, back.params):
        assert np.array_equal(a, b)
    obs = np.random.default_rng(28).normal(size=(10, 3))
    assert np.array_equal(ppo.mean_action(policy, obs),
                          ppo.mean_action(back, obs))


# ---------------------------------------------------------------------------
# end-to-end learning


def test_point_reach_learning_improves():
    base, trained = [], []
    for seed in range(5):
        b, t = point_reach_returns(seed)
        base.append(b)
        trained.append(t)
    mean_base = float(np.mean(base))
    mean_trained = float(np.mean(trained))
    improvement = (mean_trained - mean_base) / abs(mean_base)
    assert improvement >= 0.5, (mean_base, mean_trained)
