"""Clipped-surrogate policy optimization with GAE, on the dense nets.

Everything is explicit numpy: the actor is a DenseNet whose tanh output
layer produces bounded action means, exploration noise comes from a
per-dimension learnable log-std, and the critic is a separate DenseNet.
Updates backpropagate handwritten surrogate/value/entropy gradients
through nn.backward and apply Adam.

Bounding the mean matters for exploration: with an identity output the
surrogate happily inflates |mean| far past any actuator limit, at which
point the sampled direction is deterministic and the noise scale is
behaviorally irrelevant. Squashing keeps the noise competitive with the
mean for the whole run.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, nn

Array = np.ndarray

LOG_STD_MIN = -5.0
# actions saturate the per-step cap well before sigma reaches e^0.5, and
# past that point the Gaussian is flat enough that the likelihood-ratio
# signal vanishes; an entropy bonus can then inflate sigma without
# resistance, which is a one-way trip into noise
LOG_STD_MAX = 0.5
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PolicyNet:
    actor: nn.DenseNet    # observation -> action mean in (-1, 1)
    critic: nn.DenseNet   # observation -> value (width 1)
    log_std: Array        # (act_dim,), clamped to [LOG_STD_MIN, LOG_STD_MAX]

    @property
    def obs_dim(self) -> int:
        return self.actor.sizes[0]

    @property
    def act_dim(self) -> int:
        return self.actor.sizes[-1]

    @property
    def params(self) -> list:
        return self.actor.params + self.critic.params + [self.log_std]


def build_policy(obs_dim: int, act_dim: int, hidden=(64, 64),
                 actor_seed: int = 0, critic_seed: int = 1,
                 init_log_std: float = -0.5) -> PolicyNet:
    if not LOG_STD_MIN <= init_log_std <= LOG_STD_MAX:
        raise ValueError("init_log_std outside the clamp range")
    actor_acts = ["tanh"] * (len(hidden) + 1)
    critic_acts = ["tanh"] * len(hidden) + ["identity"]
    actor = nn.init([obs_dim, *hidden, act_dim], actor_acts, actor_seed)
    critic = nn.init([obs_dim, *hidden, 1], critic_acts, critic_seed)
    log_std = np.full(act_dim, float(init_log_std))
    return PolicyNet(actor, critic, log_std)


# ---------------------------------------------------------------------------
# acting


def gaussian_log_prob(z: Array, log_std: Array) -> Array:
    """Log density of a diagonal Gaussian at standardized offsets z."""
    return -0.5 * (z * z + LOG_2PI).sum(axis=-1) - log_std.sum()


def sample_action(policy: PolicyNet, obs: Array, rng: np.random.Generator):
    """Stochastic actions for a (B, obs_dim) batch: (action, log_prob, value)."""
    mu, _ = nn.forward(policy.actor, obs)
    noise = rng.standard_normal(mu.shape)
    action = mu + np.exp(policy.log_std) * noise
    logp = gaussian_log_prob(noise, policy.log_std)
    value, _ = nn.forward(policy.critic, obs)
    return action, logp, value[:, 0]


def mean_action(policy: PolicyNet, obs: Array) -> Array:
    mu, _ = nn.forward(policy.actor, obs)
    return mu


def value_of(policy: PolicyNet, obs: Array) -> Array:
    v, _ = nn.forward(policy.critic, obs)
    return v[:, 0]


# ---------------------------------------------------------------------------
# advantage estimation


def compute_gae(rewards: Array, values: Array, dones: Array,
                gamma: float = 0.99, lam: float = 0.95):
    """(advantages, returns) for a (T, N) rollout.

    values must carry the bootstrap row: shape (T+1, N). Done steps cut
    the recursion, so horizon truncation counts as termination.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    T, N = rewards.shape
    if values.shape != (T + 1, N) or dones.shape != (T, N):
        raise ValueError("compute_gae: inconsistent rollout shapes")
    return kernels.gae_backward(rewards, values, dones, float(gamma), float(lam))


def normalize_advantages(adv: Array, std_floor: float = 0.05) -> Array:
    """Center and rescale a flat advantage batch.

    The divisor is floored so a batch with almost no advantage signal
    (well-fit critic, stale rewards) is not blown up to unit scale;
    amplifying residual noise that way can churn a converged policy.
    """
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / max(float(adv.std()), std_floor)


# ---------------------------------------------------------------------------
# observation normalization


@dataclass
class RunningNorm:
    """Streaming mean/variance normalizer (clipped output).

    The training loop updates with each incoming observation batch and
    then normalizes it; evaluation only normalizes (frozen statistics).
    """

    mean: Array
    var: Array
    count: float

    @classmethod
    def create(cls, dim: int) -> "RunningNorm":
        return cls(np.zeros(dim), np.ones(dim), 1e-4)

    def update(self, x: Array):
        x = np.asarray(x, dtype=np.float64)
        b_mean = x.mean(axis=0)
        b_var = x.var(axis=0)
        b_count = x.shape[0]
        delta = b_mean - self.mean
        tot = self.count + b_count
        m_a = self.var * self.count
        m_b = b_var * b_count
        m2 = m_a + m_b + delta * delta * self.count * b_count / tot
        self.mean = self.mean + delta * b_count / tot
        self.var = m2 / tot
        self.count = tot

    def normalize(self, x: Array) -> Array:
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -10.0, 10.0)

    def to_npz_dict(self, prefix: str = "obs_norm") -> dict:
        return {f"{prefix}_mean": self.mean, f"{prefix}_var": self.var,
                f"{prefix}_count": np.array([self.count])}

    @classmethod
    def from_npz_dict(cls, data, prefix: str = "obs_norm") -> "RunningNorm":
        return cls(np.array(data[f"{prefix}_mean"]),
                   np.array(data[f"{prefix}_var"]),
                   float(data[f"{prefix}_count"][0]))


# ---------------------------------------------------------------------------
# the update


def clipped_gradients(policy: PolicyNet, obs: Array, actions: Array,
                      old_log_probs: Array, advantages: Array, returns: Array,
                      clip_eps: float = 0.2, vf_coef: float = 0.5,
                      ent_coef: float = 0.01):
    """Loss gradients for one minibatch, in policy.params order.

    Loss = -mean(min(ratio*A, clip(ratio)*A)) + vf_coef*mean((v-R)^2)
           - ent_coef*entropy. Returns (grads, stats). Raises
    RuntimeError instead of returning non-finite gradients.
    """
    m = obs.shape[0]
    mu, actor_cache = nn.forward(policy.actor, obs)
    std = np.exp(policy.log_std)
    z = (actions - mu) / std
    logp = gaussian_log_prob(z, policy.log_std)
    ratio = np.exp(logp - old_log_probs)

    surr_raw = ratio * advantages
    surr_clip = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    pg_loss = -float(np.minimum(surr_raw, surr_clip).mean())

    v, critic_cache = nn.forward(policy.critic, obs)
    v = v[:, 0]
    v_err = v - returns
    v_loss = vf_coef * float((v_err * v_err).mean())
    entropy = float(policy.log_std.sum()) + \
        0.5 * policy.act_dim * (LOG_2PI + 1.0)
    loss = pg_loss + v_loss - ent_coef * entropy
    if not np.isfinite(loss):
        raise RuntimeError(
            f"non-finite update loss: pg={pg_loss}, value={v_loss}, "
            f"ratio range [{ratio.min()}, {ratio.max()}], "
            f"advantage range [{advantages.min()}, {advantages.max()}]")

    # gradient of -min(surr_raw, surr_clip) wrt logp: the clipped branch
    # is flat, so clipping gates the whole sample
    gated = ((advantages > 0) & (ratio > 1.0 + clip_eps)) | \
            ((advantages < 0) & (ratio < 1.0 - clip_eps))
    d_logp = np.where(gated, 0.0, -ratio * advantages) / m

    d_mu = d_logp[:, None] * z / std
    actor_grads, _ = nn.backward(policy.actor, actor_cache, d_mu)
    d_log_std = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0) - ent_coef

    d_v = (2.0 * vf_coef / m) * v_err
    critic_grads, _ = nn.backward(policy.critic, critic_cache, d_v[:, None])

    grads = actor_grads + critic_grads + [d_log_std]
    stats = {"pg_loss": pg_loss, "value_loss": v_loss,
             "approx_kl": float((old_log_probs - logp).mean()),
             "clip_fraction": float((np.abs(ratio - 1.0) > clip_eps).mean())}
    return grads, stats


def ppo_update(policy: PolicyNet, opt_state: nn.AdamState, obs: Array,
               actions: Array, old_log_probs: Array, advantages: Array,
               returns: Array, shuffle_rng: np.random.Generator,
               clip_eps: float = 0.2, epochs: int = 4, minibatch: int = 128,
               vf_coef: float = 0.5, ent_coef: float = 0.01,
               lr: float = 3e-4, target_kl: float = 0.02,
               weight_decay: float = 0.0) -> dict:
    """Clipped-surrogate update over a flat (B, .) batch; returns stats.

    Advantages are normalized here (whole batch, mean 0, unit-ish std).
    Each minibatch pass takes one Adam step on the clipped_gradients and
    re-clamps log_std. When the mean approximate KL of an epoch exceeds
    target_kl the remaining epochs are skipped; one oversized update can
    wreck a policy that took a million steps to learn. Pass
    target_kl=inf to disable the early stop.

    weight_decay applies decoupled decay to the actor weights only. Its
    job is to keep the tanh action head out of deep saturation in
    regions with no reward gradient, where a pinned mean would otherwise
    damp incoming gradients to nothing and freeze the behavior there.
    """
    obs = np.asarray(obs, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    old_log_probs = np.asarray(old_log_probs, dtype=np.float64).ravel()
    returns = np.asarray(returns, dtype=np.float64).ravel()
    batch = obs.shape[0]
    if batch == 0:
        raise ValueError("empty update batch")
    adv = normalize_advantages(np.asarray(advantages).ravel())

    agg = {"pg_loss": [], "value_loss": [], "approx_kl": [], "clip_fraction": []}
    epochs_run = 0
    decay = 1.0 - lr * weight_decay
    for _ in range(epochs):
        perm = shuffle_rng.permutation(batch)
        epoch_kl = []
        for start in range(0, batch, minibatch):
            idx = perm[start:start + minibatch]
            grads, stats = clipped_gradients(
                policy, obs[idx], actions[idx], old_log_probs[idx],
                adv[idx], returns[idx], clip_eps, vf_coef, ent_coef)
            nn.adam_step(policy.params, grads, opt_state, lr)
            if weight_decay > 0.0:
                for p in policy.actor.params:
                    p *= decay
            np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX,
                    out=policy.log_std)
            epoch_kl.append(stats["approx_kl"])
            for k in agg:
                agg[k].append(stats[k])
        epochs_run += 1
        if float(np.mean(epoch_kl)) > target_kl:
            break

    out = {k: float(np.mean(v)) for k, v in agg.items()}
    out["log_std_mean"] = float(policy.log_std.mean())
    out["epochs_run"] = epochs_run
    return out


# ---------------------------------------------------------------------------
# checkpointing


def policy_to_npz_dict(policy: PolicyNet) -> dict:
    out = nn.params_to_npz_dict("actor", policy.actor)
    out.update(nn.params_to_npz_dict("critic", policy.critic))
    out["policy_log_std"] = policy.log_std
    out["policy_sizes"] = np.asarray(policy.actor.sizes, dtype=np.int64)
    return out


def policy_from_npz_dict(data) -> PolicyNet:
    sizes = [int(s) for s in data["policy_sizes"]]
    hidden_n = len(sizes) - 2
    actor = nn.net_from_npz("actor", data, sizes, ["tanh"] * (hidden_n + 1))
    critic_sizes = sizes[:-1] + [1]
    critic = nn.net_from_npz("critic", data, critic_sizes,
                             ["tanh"] * hidden_n + ["identity"])
    log_std = np.array(data["policy_log_std"], dtype=np.float64)
    return PolicyNet(actor, critic, log_std)
