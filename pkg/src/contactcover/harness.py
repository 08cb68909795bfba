"""Training loop, evaluation, cluster export, and the ablation driver.

All run artifacts are deterministic for a given root seed except
timing.jsonl, which holds the wall-clock sidecar so metrics.jsonl can be
compared bit-for-bit across repeat runs.
"""
from __future__ import annotations

import json
import os
import time
from collections import Counter as TallyCounter
from collections import deque
from dataclasses import replace

import numpy as np

from . import config as configlib
from . import coverage, kernels, nn, ppo, pushbox, rewards, seeding, state_hash
from .geometry import positions_of

CHECKPOINT_NAME = "checkpoint.npz"
METRICS_NAME = "metrics.jsonl"
TIMING_NAME = "timing.jsonl"
CONFIG_NAME = "config.resolved"
SUMMARY_NAME = "summary.txt"
SUCCESS_WINDOW = 100  # trailing episodes for the logged success rate


# ---------------------------------------------------------------------------
# per-step exploration rewards


def exploration_rewards(counter, hasher, variant, canon_pos, labels, box_half,
                        ball, box_translations, goal_translation, force,
                        reward_cfg, contact_dist, contact_force):
    """Hash, match, count, and score one batched transition.

    Counter increments happen before any count is read back: the contact
    reward uses the value returned by increment(), and the energy term
    gathers counts only after the whole increment pass. Returns a dict
    with per-env arrays (states, hash_index, match, distance, in_contact,
    contact, energy).
    """
    ball = np.asarray(ball, dtype=np.float64)
    box_t = np.asarray(box_translations, dtype=np.float64)
    n = ball.shape[0]
    goal_t = np.broadcast_to(np.asarray(goal_translation, np.float64), (n, 2))
    states = state_hash.object_state_batch(canon_pos, box_t, goal_t)
    if variant == "single_state":
        idx = np.zeros(n, dtype=np.int64)
    else:
        idx = state_hash.hash_states(hasher, states)

    world = canon_pos[None, :, :] + box_t[:, None, :]
    dist = np.linalg.norm(ball[:, None, :] - world, axis=2)
    match = dist.argmin(axis=1)
    dmin = dist[np.arange(n), match]
    in_contact = coverage.detect_contact(dmin, force, contact_dist,
                                         contact_force)

    contact_r = np.zeros(n, dtype=np.float64)
    for i in range(n):
        if in_contact[i]:
            post = counter.increment(int(idx[i]), 0, int(labels[match[i]]))
            contact_r[i] = float(coverage.count_weight(post))

    m = canon_pos.shape[0]
    weights = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        weights[i] = coverage.count_weight(counter.counts(int(idx[i]))[0])[labels]
    local_ball = ball - box_t
    targets = np.tile(canon_pos, (n, 1, 1))
    if reward_cfg.use_occlusion:
        occluded = kernels.segment_box_mask(local_ball, targets,
                                            np.zeros(2),
                                            np.array([box_half, box_half]),
                                            1e-9)
        weights[occluded] = 0.0
    decay = reward_cfg.energy_decay
    if decay is None:
        decay = rewards.default_energy_decay(canon_pos)
    energy = kernels.energy_sum(local_ball, targets, weights, decay)

    return {"states": states, "hash_index": idx, "match": match,
            "distance": dmin, "in_contact": in_contact,
            "contact": contact_r, "energy": energy}


# ---------------------------------------------------------------------------
# run state


def build_run_state(cfg: configlib.ExperimentConfig) -> dict:
    """Fresh env, policy, hasher, counter, and RNG streams for one run."""
    if cfg.rewards.use_directional:
        raise ValueError("directional weighting needs oriented finger "
                         "keypoints; the ball probe has none")
    root = cfg.root_seed
    env = pushbox.PushBoxVecEnv(cfg.n_envs, root_seed=root, params=cfg.env)
    policy = ppo.build_policy(
        pushbox.PushBoxVecEnv.OBS_DIM, 2, hidden=cfg.ppo.hidden,
        actor_seed=seeding.seed_int(root, seeding.STREAM_POLICY, 0),
        critic_seed=seeding.seed_int(root, seeding.STREAM_POLICY, 1),
        init_log_std=cfg.ppo.init_log_std)
    opt = nn.AdamState.for_params(policy.params)

    canon_points, _, _, region_map = env.object_surface()
    canon_pos = positions_of(canon_points)
    hasher = state_hash.build_hasher(
        input_dim=2 * 2 * canon_pos.shape[0],
        latent_dim=cfg.hasher.latent_dim, n_bits=cfg.hasher.n_bits,
        bin_weight=cfg.hasher.bin_weight, hidden=cfg.hasher.hidden,
        encoder_seed=seeding.seed_int(root, seeding.STREAM_HASHER_ENC),
        decoder_seed=seeding.seed_int(root, seeding.STREAM_HASHER_DEC),
        projection_seed=seeding.seed_int(root, seeding.STREAM_PROJECTION))
    hasher_opt = nn.AdamState.for_params(hasher.params)
    counter = coverage.CoverageCounter(n_fingers=1,
                                       n_regions=region_map.n_regions)
    labels = np.asarray(region_map.labels)
    reward_cfg = rewards.RewardConfig(
        contact_scale=cfg.rewards.contact_scale,
        energy_scale=cfg.rewards.energy_scale,
        energy_decay=cfg.rewards.energy_decay,
        use_directional=False,
        use_occlusion=cfg.rewards.use_occlusion)
    return {
        "env": env, "policy": policy, "opt": opt,
        "hasher": hasher, "hasher_opt": hasher_opt,
        "counter": counter, "obs_norm": ppo.RunningNorm.create(env.OBS_DIM),
        "region_map": region_map, "labels": labels, "canon_pos": canon_pos,
        "reward_cfg": reward_cfg,
        "rollout_rng": seeding.rng(root, seeding.STREAM_ROLLOUT),
        "shuffle_rng": seeding.rng(root, seeding.STREAM_SHUFFLE),
        "ae_rng": seeding.rng(root, seeding.STREAM_AE_SAMPLE),
    }


# ---------------------------------------------------------------------------
# training


def run_training(cfg: configlib.ExperimentConfig, out_dir=None,
                 state: dict | None = None) -> dict:
    """Train one run; writes config.resolved, metrics.jsonl, timing.jsonl,
    summary.txt, and checkpoint.npz under the output directory.

    `state` lets tests inject an instrumented run state (see
    build_run_state); production callers leave it None.
    """
    out = out_dir if out_dir is not None else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    configlib.save_json(cfg, os.path.join(out, CONFIG_NAME))

    st = state if state is not None else build_run_state(cfg)
    env = st["env"]
    policy, opt = st["policy"], st["opt"]
    hasher, hasher_opt = st["hasher"], st["hasher_opt"]
    counter, obs_norm = st["counter"], st["obs_norm"]
    labels, canon_pos = st["labels"], st["canon_pos"]
    reward_cfg = st["reward_cfg"]

    alpha, beta = cfg.rewards.effective_scales()
    if cfg.variant == "task_only":
        alpha = beta = 0.0
    p = cfg.env
    goal_t = env.goal_translation()
    n_envs, t_len = cfg.n_envs, cfg.ppo.update_every
    n_updates = cfg.n_updates
    if n_updates < 1:
        raise ValueError("total_steps too small for one update window")

    obs_buf = np.zeros((t_len, n_envs, env.OBS_DIM))
    act_buf = np.zeros((t_len, n_envs, 2))
    logp_buf = np.zeros((t_len, n_envs))
    val_buf = np.zeros((t_len + 1, n_envs))
    rew_buf = np.zeros((t_len, n_envs))
    done_buf = np.zeros((t_len, n_envs), dtype=bool)
    state_buf = np.zeros((t_len, n_envs, hasher.input_dim))
    task_buf = np.zeros((t_len, n_envs))
    sc_buf = np.zeros((t_len, n_envs))
    se_buf = np.zeros((t_len, n_envs))

    contact_max = np.zeros(n_envs)
    energy_max = np.zeros(n_envs)
    raw_obs = env.reset()
    recent_success = deque(maxlen=SUCCESS_WINDOW)
    episodes = 0
    steps = 0
    seen_indices: set = set()
    t0 = time.monotonic()

    metrics_path = os.path.join(out, METRICS_NAME)
    timing_path = os.path.join(out, TIMING_NAME)
    try:
        with open(metrics_path, "w") as mfh, open(timing_path, "w") as tfh:
            for update in range(n_updates):
                for t in range(t_len):
                    obs_norm.update(raw_obs)
                    nobs = obs_norm.normalize(raw_obs)
                    action, logp, value = ppo.sample_action(
                        policy, nobs, st["rollout_rng"])
                    next_obs, task_r, done, info = env.step(
                        action * p.step_cap)
                    exp = exploration_rewards(
                        counter, hasher, cfg.variant, canon_pos, labels,
                        p.box_half, info["ball"],
                        np.stack([info["box_x"],
                                  np.full(n_envs, p.box_center_y)], axis=1),
                        goal_t, info["force"], reward_cfg,
                        p.contact_dist, p.contact_force)
                    scaled_c, contact_max = rewards.scale_progress_batch(
                        exp["contact"], contact_max, alpha)
                    scaled_e, energy_max = rewards.scale_progress_batch(
                        exp["energy"], energy_max, beta)
                    total = task_r + scaled_c + scaled_e

                    obs_buf[t] = nobs
                    act_buf[t] = action
                    logp_buf[t] = logp
                    val_buf[t] = value
                    rew_buf[t] = total
                    done_buf[t] = done
                    state_buf[t] = exp["states"]
                    task_buf[t] = task_r
                    sc_buf[t] = scaled_c
                    se_buf[t] = scaled_e
                    seen_indices.update(np.unique(exp["hash_index"]).tolist())

                    for i in np.flatnonzero(done):
                        recent_success.append(bool(info["success"][i]))
                        episodes += 1
                    contact_max[done] = 0.0
                    energy_max[done] = 0.0
                    raw_obs = next_obs
                    steps += n_envs

                if not np.isfinite(rew_buf).all():
                    bad = np.argwhere(~np.isfinite(rew_buf))[0]
                    raise RuntimeError(
                        f"non-finite reward at update {update}, "
                        f"step {bad[0]}, env {bad[1]}")

                val_buf[t_len] = ppo.value_of(policy,
                                              obs_norm.normalize(raw_obs))
                adv, ret = ppo.compute_gae(rew_buf, val_buf, done_buf,
                                           cfg.ppo.gamma, cfg.ppo.lam)
                flat = t_len * n_envs
                stats = ppo.ppo_update(
                    policy, opt, obs_buf.reshape(flat, -1),
                    act_buf.reshape(flat, -1), logp_buf.reshape(flat),
                    adv.reshape(flat), ret.reshape(flat), st["shuffle_rng"],
                    clip_eps=cfg.ppo.clip_eps, epochs=cfg.ppo.epochs,
                    minibatch=cfg.ppo.minibatch, vf_coef=cfg.ppo.vf_coef,
                    ent_coef=cfg.ppo.ent_coef, lr=cfg.ppo.lr,
                    target_kl=cfg.ppo.target_kl,
                    weight_decay=cfg.ppo.weight_decay)
                pick = st["ae_rng"].choice(
                    flat, size=min(cfg.hasher.batch, flat), replace=False)
                ae_loss = state_hash.train_step(
                    hasher, state_buf.reshape(flat, -1)[pick], hasher_opt,
                    cfg.hasher.lr)

                record = {
                    "update": update + 1,
                    "steps": steps,
                    "episodes": episodes,
                    "success_rate": (float(np.mean(recent_success))
                                     if recent_success else None),
                    "mean_task_reward": float(task_buf.mean()),
                    "mean_scaled_contact": float(sc_buf.mean()),
                    "mean_scaled_energy": float(se_buf.mean()),
                    "mean_total_reward": float(rew_buf.mean()),
                    "counter_entries": counter.nonzero_entries(),
                    "counter_states": counter.n_states,
                    "distinct_hash_indices": len(seen_indices),
                    "ae_loss": float(ae_loss),
                    "pg_loss": float(stats["pg_loss"]),
                    "value_loss": float(stats["value_loss"]),
                    "approx_kl": float(stats["approx_kl"]),
                    "clip_fraction": float(stats["clip_fraction"]),
                    "log_std_mean": float(stats["log_std_mean"]),
                }
                mfh.write(json.dumps(record, sort_keys=True) + "\n")
                tfh.write(json.dumps(
                    {"update": update + 1,
                     "wall_clock": time.monotonic() - t0}) + "\n")
    except Exception as exc:
        dump = {
            "error": repr(exc),
            "steps": steps,
            "episodes": episodes,
            "counter_states": counter.n_states,
            "counter_entries": counter.nonzero_entries(),
            "distinct_hash_indices": len(seen_indices),
        }
        with open(os.path.join(out, "abort_dump.json"), "w") as fh:
            json.dump(dump, fh, indent=2)
        raise

    save_checkpoint(os.path.join(out, CHECKPOINT_NAME), cfg, policy,
                    obs_norm, hasher, counter, st["region_map"], steps)
    summary = {
        "out_dir": out,
        "variant": cfg.variant,
        "root_seed": cfg.root_seed,
        "updates": n_updates,
        "steps": steps,
        "episodes": episodes,
        "train_success_rate": (float(np.mean(recent_success))
                               if recent_success else None),
        "counter_entries": counter.nonzero_entries(),
        "distinct_hash_indices": len(seen_indices),
        "wall_clock": time.monotonic() - t0,
    }
    with open(os.path.join(out, SUMMARY_NAME), "w") as fh:
        for key in ("variant", "root_seed", "updates", "steps", "episodes",
                    "train_success_rate", "counter_entries",
                    "distinct_hash_indices"):
            fh.write(f"{key}: {summary[key]}\n")
    return summary


# ---------------------------------------------------------------------------
# checkpointing


def save_checkpoint(path, cfg, policy, obs_norm, hasher, counter,
                    region_map, steps):
    data = {}
    data.update(ppo.policy_to_npz_dict(policy))
    data.update(obs_norm.to_npz_dict())
    data.update(state_hash.to_npz_dict(hasher))
    data.update(counter.to_state())
    data["region_labels"] = np.asarray(region_map.labels, dtype=np.int64)
    data["region_centers"] = np.asarray(region_map.centers)
    data["region_normals"] = np.asarray(region_map.mean_normals)
    data["trained_steps"] = np.array([steps], dtype=np.int64)
    data["config_json"] = np.array(json.dumps(configlib.to_dict(cfg),
                                              sort_keys=True))
    np.savez(path, **data)


def load_checkpoint(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        cfg = configlib.from_dict(json.loads(str(data["config_json"])))
        counter = coverage.CoverageCounter.from_state(
            1, data["region_centers"].shape[0],
            {"counter_keys": data["counter_keys"],
             "counter_values": data["counter_values"]})
        return {
            "config": cfg,
            "policy": ppo.policy_from_npz_dict(data),
            "obs_norm": ppo.RunningNorm.from_npz_dict(data),
            "hasher": state_hash.from_npz_dict(data),
            "counter": counter,
            "region_labels": np.array(data["region_labels"]),
            "region_centers": np.array(data["region_centers"]),
            "region_normals": np.array(data["region_normals"]),
            "trained_steps": int(data["trained_steps"][0]),
        }


def _pieces(checkpoint):
    if isinstance(checkpoint, (str, os.PathLike)):
        return load_checkpoint(checkpoint)
    return checkpoint


# ---------------------------------------------------------------------------
# evaluation


def evaluate(checkpoint, episodes: int = 200, seed: int = 0,
             dump_path=None, policy_fn=None) -> dict:
    """Deterministic evaluation with mean actions, half the episodes from
    each spawn side. `policy_fn(env) -> (n, 2) env-unit actions` replaces
    the checkpoint policy when given (e.g. a scripted expert).

    With dump_path, writes one JSON line per step with the full reward
    decomposition (computed against a scratch copy of the counter, so
    the checkpoint state is untouched).
    """
    if episodes < 2:
        raise ValueError("need at least 2 episodes (one per side)")
    pc = _pieces(checkpoint)
    cfg = pc["config"]
    p = cfg.env
    env = pushbox.PushBoxVecEnv(
        2, root_seed=seed, params=p, stream=seeding.STREAM_EVAL_ENV,
        forced_side=[pushbox.LEFT, pushbox.RIGHT])
    quota = [episodes - episodes // 2, episodes // 2]
    finished = [0, 0]
    records = []

    scratch = coverage.CoverageCounter.from_state(
        pc["counter"].n_fingers, pc["counter"].n_regions,
        pc["counter"].to_state())
    labels = pc["region_labels"]
    canon_pos = positions_of(env.surface_points)
    reward_cfg = rewards.RewardConfig(
        contact_scale=cfg.rewards.contact_scale,
        energy_scale=cfg.rewards.energy_scale,
        energy_decay=cfg.rewards.energy_decay,
        use_directional=False, use_occlusion=cfg.rewards.use_occlusion)
    alpha, beta = cfg.rewards.effective_scales()
    if cfg.variant == "task_only":
        alpha = beta = 0.0
    contact_max = np.zeros(2)
    energy_max = np.zeros(2)
    goal_t = env.goal_translation()

    obs = env.reset()
    task_return = np.zeros(2)
    ep_index = [0, 0]
    dump_fh = open(dump_path, "w") if dump_path else None
    try:
        while finished[0] < quota[0] or finished[1] < quota[1]:
            nobs = pc["obs_norm"].normalize(obs)
            if policy_fn is not None:
                action = np.asarray(policy_fn(env), dtype=np.float64)
            else:
                action = ppo.mean_action(pc["policy"], nobs) * p.step_cap
            obs, task_r, done, info = env.step(action)
            task_return += task_r

            if dump_fh is not None:
                exp = exploration_rewards(
                    scratch, pc["hasher"], cfg.variant, canon_pos, labels,
                    p.box_half, info["ball"],
                    np.stack([info["box_x"], np.full(2, p.box_center_y)],
                             axis=1),
                    goal_t, info["force"], reward_cfg,
                    p.contact_dist, p.contact_force)
                scaled_c, contact_max = rewards.scale_progress_batch(
                    exp["contact"], contact_max, alpha)
                scaled_e, energy_max = rewards.scale_progress_batch(
                    exp["energy"], energy_max, beta)
                for i in range(2):
                    dump_fh.write(json.dumps({
                        "env": i, "episode": ep_index[i],
                        "t": int(info["step_index"][i]),
                        "side": int(info["init_side"][i]),
                        "ball": [float(v) for v in info["ball"][i]],
                        "box_x": float(info["box_x"][i]),
                        "goal_x": p.goal_x,
                        "action": [float(v) for v in action[i]],
                        "force": float(info["force"][i]),
                        "task_reward": float(task_r[i]),
                        "contact_reward": float(exp["contact"][i]),
                        "energy_reward": float(exp["energy"][i]),
                        "scaled_contact": float(scaled_c[i]),
                        "scaled_energy": float(scaled_e[i]),
                        "total_reward": float(task_r[i] + scaled_c[i]
                                              + scaled_e[i]),
                        "hash_index": int(exp["hash_index"][i]),
                        "success": bool(info["success"][i]),
                        "done": bool(done[i]),
                    }, sort_keys=True) + "\n")

            for i in np.flatnonzero(done):
                side = int(info["init_side"][i])
                if finished[side] < quota[side]:
                    records.append({
                        "episode": len(records), "side": side,
                        "success": bool(info["success"][i]),
                        "steps": int(info["step_index"][i]),
                        "task_return": float(task_return[i]),
                        "final_box_x": float(info["box_x"][i]),
                    })
                    finished[side] += 1
                task_return[i] = 0.0
                ep_index[i] += 1
                contact_max[i] = 0.0
                energy_max[i] = 0.0
    finally:
        if dump_fh is not None:
            dump_fh.close()

    succ = np.array([r["success"] for r in records], dtype=float)
    sides = np.array([r["side"] for r in records])
    return {
        "episodes": len(records),
        "success_rate": float(succ.mean()),
        "left_rate": float(succ[sides == pushbox.LEFT].mean()),
        "right_rate": float(succ[sides == pushbox.RIGHT].mean()),
        "mean_task_return": float(np.mean([r["task_return"]
                                           for r in records])),
        "records": records,
    }


def scripted_policy_fn(env) -> np.ndarray:
    """Expert actions for every instance of a PushBoxVecEnv."""
    return np.stack([
        pushbox.scripted_push_action(env.ball[i], float(env.box_x[i]),
                                     int(env.init_side[i]), env.params)
        for i in range(env.n_envs)])


# ---------------------------------------------------------------------------
# cluster export


def export_clusters(checkpoint, samples: int = 2000, seed: int = 0,
                    out_path=None) -> dict:
    """Sample object states from both spawn sides with the stochastic
    policy, hash each one, and report per-side modal indices and purity.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    pc = _pieces(checkpoint)
    cfg = pc["config"]
    p = cfg.env
    env = pushbox.PushBoxVecEnv(
        2, root_seed=seed, params=p, stream=seeding.STREAM_EVAL_ENV,
        forced_side=[pushbox.LEFT, pushbox.RIGHT])
    act_rng = seeding.rng(seed, seeding.STREAM_ROLLOUT)
    canon_points, _, _, region_map = env.object_surface()
    canon_pos = positions_of(canon_points)
    goal_t = env.goal_translation()

    quota = [samples - samples // 2, samples // 2]
    taken = [0, 0]
    tallies = [TallyCounter(), TallyCounter()]
    sample_records = []
    obs = env.reset()
    while taken[0] < quota[0] or taken[1] < quota[1]:
        nobs = pc["obs_norm"].normalize(obs)
        action, _, _ = ppo.sample_action(pc["policy"], nobs, act_rng)
        obs, _, done, info = env.step(action * p.step_cap)
        box_t = np.stack([info["box_x"], np.full(2, p.box_center_y)], axis=1)
        states = state_hash.object_state_batch(
            canon_pos, box_t, np.broadcast_to(goal_t, (2, 2)))
        if cfg.variant == "single_state":
            idx = np.zeros(2, dtype=np.int64)
        else:
            idx = state_hash.hash_states(pc["hasher"], states)
        for i in range(2):
            side = int(info["init_side"][i])
            if taken[side] >= quota[side]:
                continue
            taken[side] += 1
            tallies[side][int(idx[i])] += 1
            sample_records.append({
                "type": "sample", "side": side,
                "t": int(info["step_index"][i]),
                "ball": [float(v) for v in info["ball"][i]],
                "box_x": float(info["box_x"][i]),
                "hash_index": int(idx[i]),
            })

    def _modal(tally):
        index, count = max(tally.items(), key=lambda kv: (kv[1], -kv[0]))
        return index, count / sum(tally.values())

    left_modal, left_purity = _modal(tallies[0])
    right_modal, right_purity = _modal(tallies[1])
    summary = {
        "samples": samples,
        "left_modal": left_modal, "left_purity": left_purity,
        "right_modal": right_modal, "right_purity": right_purity,
        "distinct_modals": left_modal != right_modal,
        "left_histogram": dict(sorted(tallies[0].items())),
        "right_histogram": dict(sorted(tallies[1].items())),
    }
    if out_path is not None:
        with open(out_path, "w") as fh:
            for rec in region_map.to_records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            for rec in sample_records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.write(json.dumps({"type": "summary", **{
                k: summary[k] for k in ("samples", "left_modal",
                                        "left_purity", "right_modal",
                                        "right_purity", "distinct_modals")}},
                sort_keys=True) + "\n")
    summary["records"] = sample_records
    return summary


# ---------------------------------------------------------------------------
# ablation driver


def _ablate_job(args):
    cfg_dict, variant, run_seed, run_dir, eval_episodes = args
    cfg = configlib.from_dict(cfg_dict)
    cfg = replace(cfg, variant=variant, root_seed=run_seed, out_dir=run_dir)
    t0 = time.monotonic()
    run_training(cfg)
    result = evaluate(os.path.join(run_dir, CHECKPOINT_NAME),
                      episodes=eval_episodes, seed=run_seed)
    return {
        "variant": variant,
        "seed": run_seed,
        "success_rate": result["success_rate"],
        "left_rate": result["left_rate"],
        "right_rate": result["right_rate"],
        "wall_clock": time.monotonic() - t0,
    }


def ablate(cfg: configlib.ExperimentConfig, seeds: int = 5, workers: int = 1,
           out_dir=None) -> dict:
    """Train and evaluate every variant over `seeds` paired seeds.

    Writes per-run artifacts under <out>/<variant>_seed<k>/, the cross-
    variant table to <out>/summary.txt, and machine-readable results to
    <out>/ablate_results.json (wall-clock kept out of both; it goes to
    <out>/timing.json).
    """
    if seeds < 1:
        raise ValueError("seeds must be positive")
    out = out_dir if out_dir is not None else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    cfg_dict = configlib.to_dict(cfg)
    jobs = []
    for variant in configlib.VARIANTS:
        for k in range(seeds):
            run_dir = os.path.join(out, f"{variant}_seed{k}")
            jobs.append((cfg_dict, variant, cfg.root_seed + k, run_dir,
                         cfg.eval_episodes))

    t0 = time.monotonic()
    if workers > 1:
        import multiprocessing as mp
        with mp.get_context("fork").Pool(workers) as pool:
            results = pool.map(_ablate_job, jobs)
    else:
        results = [_ablate_job(job) for job in jobs]

    by_variant = {}
    for res in results:
        by_variant.setdefault(res["variant"], []).append(res)
    table = {}
    for variant in configlib.VARIANTS:
        rates = [r["success_rate"] for r in by_variant[variant]]
        table[variant] = {
            "rates": rates,
            "mean": float(np.mean(rates)),
            "std": float(np.std(rates)),
        }
    summary = {
        "seeds": seeds,
        "root_seed": cfg.root_seed,
        "total_steps": cfg.total_steps,
        "table": table,
        "gap": table["ccge"]["mean"] - table["single_state"]["mean"],
    }

    with open(os.path.join(out, SUMMARY_NAME), "w") as fh:
        fh.write(f"{'variant':<14}{'mean':>8}{'std':>8}  per-seed\n")
        for variant in configlib.VARIANTS:
            row = table[variant]
            per_seed = " ".join(f"{r:.3f}" for r in row["rates"])
            fh.write(f"{variant:<14}{row['mean']:>8.3f}{row['std']:>8.3f}"
                     f"  {per_seed}\n")
        fh.write(f"\nccge - single_state gap: {summary['gap']:.3f}\n")
    with open(os.path.join(out, "ablate_results.json"), "w") as fh:
        json.dump({"seeds": seeds, "root_seed": cfg.root_seed,
                   "total_steps": cfg.total_steps, "table": table,
                   "gap": summary["gap"],
                   "runs": [{k: v for k, v in r.items()
                             if k != "wall_clock"} for r in results]},
                  fh, indent=2, sort_keys=True)
    with open(os.path.join(out, "timing.json"), "w") as fh:
        json.dump({"total_wall_clock": time.monotonic() - t0,
                   "workers": workers,
                   "runs": [{"variant": r["variant"], "seed": r["seed"],
                             "wall_clock": r["wall_clock"]}
                            for r in results]}, fh, indent=2)
    return summary
